#include "vpoll/error.hpp"

namespace vpoll {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::CodeOutOfRange: return "CodeOutOfRange";
    case Errc::DuplicateRespondentId: return "DuplicateRespondentId";
    case Errc::UnknownQuestion: return "UnknownQuestion";
    case Errc::UnresolvableCode: return "UnresolvableCode";
    case Errc::Io: return "Io";
    case Errc::BackendUnreachable: return "BackendUnreachable";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::ReplayMiss: return "ReplayMiss";
    case Errc::Unparseable: return "Unparseable";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::WeightOutOfRange: return "WeightOutOfRange";
    case Errc::NoUsableQuestions: return "NoUsableQuestions";
    case Errc::StateSetMismatch: return "StateSetMismatch";
    case Errc::MissingParty: return "MissingParty";
    case Errc::AllMissing: return "AllMissing";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::NoVotes: return "NoVotes";
    case Errc::MissingState: return "MissingState";
    case Errc::ExactTie: return "ExactTie";
    case Errc::CycleMismatch: return "CycleMismatch";
    case Errc::OverlapError: return "OverlapError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Locked: return "Locked";
  }
  return "Unknown";
}

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::BackendUnreachable:
    case Errc::AuthMissing:
    case Errc::ReplayMiss:
      return 3;
    case Errc::InvalidConfig:
    case Errc::WeightOutOfRange:
    case Errc::OverlapError:
    case Errc::Locked:
      return 2;
    default:
      return 4;
  }
}

}  // namespace vpoll
