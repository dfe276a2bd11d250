#pragma once

#include <cstdint>
#include <string>

namespace nrba::simlab {

// Seed of the bundled synthetic study shipped under data/.
inline constexpr std::uint64_t kSyntheticSeed = 20260809;

struct SyntheticPaths {
  std::string data_csv;
  std::string config_json;
};

// Writes the ECLS-like synthetic study into dir: 5,000 children in 100
// school PSUs across 4 strata, 15 frame auxiliaries plus a late-arriving
// household measure, ~87% child response, two assessment outcomes with a
// sprinkle of sentinel-coded and blank item nonresponse. Also writes the
// matching analysis config. Fully deterministic in the seed.
SyntheticPaths write_synthetic_survey(const std::string& dir,
                                      std::uint64_t seed = kSyntheticSeed);

}  // namespace nrba::simlab
