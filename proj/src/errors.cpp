#include "pbgcn/errors.hpp"

namespace pbgcn {

const char* errc_name(errc code) {
  switch (code) {
    case errc::InvalidGraph: return "InvalidGraph";
    case errc::UncoveredVertex: return "UncoveredVertex";
    case errc::UncoveredEdge: return "UncoveredEdge";
    case errc::DisconnectedPart: return "DisconnectedPart";
    case errc::NoSharedVertex: return "NoSharedVertex";
    case errc::ZeroDegreeVertex: return "ZeroDegreeVertex";
    case errc::VertexNotInPart: return "VertexNotInPart";
    case errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case errc::ShapeMismatch: return "ShapeMismatch";
    case errc::InvalidLabel: return "InvalidLabel";
    case errc::NonScalarLoss: return "NonScalarLoss";
    case errc::EpochOutOfRange: return "EpochOutOfRange";
    case errc::MissingGrad: return "MissingGrad";
    case errc::EmptyDataset: return "EmptyDataset";
    case errc::DivergedLoss: return "DivergedLoss";
    case errc::MalformedHeader: return "MalformedHeader";
    case errc::JointCountMismatch: return "JointCountMismatch";
    case errc::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case errc::TooManyBodies: return "TooManyBodies";
    case errc::PatternMismatch: return "PatternMismatch";
    case errc::EmptySide: return "EmptySide";
    case errc::InvalidSpec: return "InvalidSpec";
    case errc::EmptyEvalSet: return "EmptyEvalSet";
    case errc::IOError: return "IOError";
    case errc::UnknownSubcommand: return "UnknownSubcommand";
    case errc::ConfigParseError: return "ConfigParseError";
    case errc::ConfigMismatch: return "ConfigMismatch";
    case errc::UnknownClassCount: return "UnknownClassCount";
  }
  return "UnknownError";
}

}  // namespace pbgcn
