#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relgraph {

enum class ErrorKind {
    // model_io
    BadMagic,
    TruncatedPayload,
    ManifestParseError,
    ShapeMismatch,
    MissingTensor,
    WrongShape,
    UnknownFamily,
    ParseError,
    EmptyGraph,
    Io,
    // graph_core
    NonFiniteInput,
    EmptyList,
    InvalidArgument,
    // builders
    BadWindowAssignment,
    BadKernel,
    IndivisibleGrid,
    IncompatibleGrid,
    MixedSizes,
    // analysis
    InsufficientPoints,
    RankDeficient,
    DegenerateFit,
    TooFewDatasets,
    ConstantSeries,
    InconsistentMeta,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace relgraph
