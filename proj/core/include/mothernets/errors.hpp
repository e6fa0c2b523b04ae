#pragma once

#include <stdexcept>
#include <string>

namespace mothernets {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define MOTHERNETS_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

// archspec
MOTHERNETS_DEFINE_ERROR(InvalidArch);
MOTHERNETS_DEFINE_ERROR(HeterogeneousKind);
MOTHERNETS_DEFINE_ERROR(MixedEntryKind);

// mothernet_build
MOTHERNETS_DEFINE_ERROR(EmptyCluster);

// clustering
MOTHERNETS_DEFINE_ERROR(InvalidG);
MOTHERNETS_DEFINE_ERROR(InvalidTau);

// tensor_engine
MOTHERNETS_DEFINE_ERROR(ShapeMismatch);
MOTHERNETS_DEFINE_ERROR(NonFiniteValue);
MOTHERNETS_DEFINE_ERROR(ConvTrainingUnsupported);

// transforms
MOTHERNETS_DEFINE_ERROR(UnhatchableSpec);
MOTHERNETS_DEFINE_ERROR(ActivationNotIdempotent);
MOTHERNETS_DEFINE_ERROR(WidthMismatch);
MOTHERNETS_DEFINE_ERROR(InvalidReplicationMap);
MOTHERNETS_DEFINE_ERROR(EvenEnlargement);
MOTHERNETS_DEFINE_ERROR(MissingProvenance);

// pipeline
MOTHERNETS_DEFINE_ERROR(StrategyUnsupported);

// inference
MOTHERNETS_DEFINE_ERROR(UnsupportedTopology);

// diagnostics
MOTHERNETS_DEFINE_ERROR(InsufficientTrials);
MOTHERNETS_DEFINE_ERROR(AssumptionViolated);

// io
MOTHERNETS_DEFINE_ERROR(IoError);
MOTHERNETS_DEFINE_ERROR(ParseError);

#undef MOTHERNETS_DEFINE_ERROR

} // namespace mothernets
