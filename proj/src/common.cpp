#include "conav/common.hpp"

#include <cmath>

namespace conav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfiguration: return "invalid-configuration";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidPose: return "invalid-pose";
    case ErrorCode::InvalidEdit: return "invalid-edit";
    case ErrorCode::InvalidSegment: return "invalid-segment";
    case ErrorCode::InvalidArchitecture: return "invalid-architecture";
    case ErrorCode::TrainingFailure: return "training-failure";
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::PlanningFailure: return "planning-failure";
    case ErrorCode::SeedPlacementFailure: return "seed-placement-failure";
    case ErrorCode::ProtocolError: return "protocol-error";
    case ErrorCode::SessionError: return "session-error";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

char direction_letter(Direction d) {
  static constexpr char kLetters[] = {'N', 'E', 'S', 'W'};
  return kLetters[static_cast<int>(d)];
}

Direction direction_from_letter(char c) {
  switch (c) {
    case 'N': case 'n': return Direction::North;
    case 'E': case 'e': return Direction::East;
    case 'S': case 's': return Direction::South;
    case 'W': case 'w': return Direction::West;
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, std::string("unknown direction '") + c + "'");
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Rng::below(0)");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  // Box-Muller; one value per call keeps the stream position predictable.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::fork(std::uint64_t salt) {
  std::uint64_t z = engine_() + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

}  // namespace conav
