#include "relgraph/error.hpp"

namespace relgraph {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::ManifestParseError: return "ManifestParseError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingTensor: return "MissingTensor";
    case ErrorKind::WrongShape: return "WrongShape";
    case ErrorKind::UnknownFamily: return "UnknownFamily";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BadWindowAssignment: return "BadWindowAssignment";
    case ErrorKind::BadKernel: return "BadKernel";
    case ErrorKind::IndivisibleGrid: return "IndivisibleGrid";
    case ErrorKind::IncompatibleGrid: return "IncompatibleGrid";
    case ErrorKind::MixedSizes: return "MixedSizes";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::TooFewDatasets: return "TooFewDatasets";
    case ErrorKind::ConstantSeries: return "ConstantSeries";
    case ErrorKind::InconsistentMeta: return "InconsistentMeta";
    }
    return "Unknown";
}

} // namespace relgraph
