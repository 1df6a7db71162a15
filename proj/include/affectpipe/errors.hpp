#pragma once

#include <stdexcept>
#include <string>

namespace affectpipe {

enum class Errc {
  ParseError,
  MissingFile,
  RateMismatch,
  SchemaMismatch,
  InsufficientData,
  GapInWindow,
  MissingBaseline,
  MissingKind,
  TooShort,
  NoBeatsDetected,
  SolverDiverged,
  WrongCount,
  OutOfRange,
  SingleClass,
  EmptyDataset,
  UnresolvedAmbiguity,
  MissingProfile,
  LengthMismatch,
  ClassTooSmall,
  RankDeficient,
  NotConverged,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ParseError: return "ParseError";
    case Errc::MissingFile: return "MissingFile";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::GapInWindow: return "GapInWindow";
    case Errc::MissingBaseline: return "MissingBaseline";
    case Errc::MissingKind: return "MissingKind";
    case Errc::TooShort: return "TooShort";
    case Errc::NoBeatsDetected: return "NoBeatsDetected";
    case Errc::SolverDiverged: return "SolverDiverged";
    case Errc::WrongCount: return "WrongCount";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::UnresolvedAmbiguity: return "UnresolvedAmbiguity";
    case Errc::MissingProfile: return "MissingProfile";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NotConverged: return "NotConverged";
  }
  return "UnknownError";
}

// Data/processing failure. CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace affectpipe
