#pragma once

// Planted-effect stress fixtures shared by the unit and acceptance tests.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "benchgauge/dataio.hpp"
#include "oracles.hpp"

namespace fixture {

struct PlantedStress {
  std::vector<bg::ChunkAnnotation> annotations;
  bg::PredictionTable predictions;
};

/// n participants, each with 30 s of heavy and 30 s of neutral participant
/// speech plus a mid-band chunk. For every seed and modality the heavy-band
/// probability equals the neutral one plus shift plus N(0, noise_sd).
inline PlantedStress planted_stress(std::size_t n, const std::map<std::string, double>& shifts,
                                    const std::vector<std::int64_t>& seeds, double noise_sd,
                                    std::uint64_t data_seed) {
  PlantedStress out;
  oracle::Lcg base_rng(data_seed);
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = 0.3 + 0.2 * base_rng.uniform();
    const std::string id = "P" + std::to_string(300 + i);
    auto chunk = [&](std::string cid, double a, double b, int topic) {
      bg::ChunkAnnotation c;
      c.subject_id = id;
      c.chunk_id = std::move(cid);
      c.start_s = a;
      c.end_s = b;
      c.topic_score = topic;
      return c;
    };
    out.annotations.push_back(chunk("c0", 0, 30, 3));
    out.annotations.push_back(chunk("c1", 30, 60, 0));
    out.annotations.push_back(chunk("c2", 60, 80, 1));
  }
  for (const auto seed : seeds) {
    for (const auto& [modality, shift] : shifts) {
      oracle::Lcg rng(data_seed * 7919 + static_cast<std::uint64_t>(seed) * 131 + modality.size() * 17 +
                      static_cast<std::uint64_t>(modality[0]));
      for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "P" + std::to_string(300 + i);
        const double neutral = base[i];
        const double heavy = std::clamp(neutral + shift + noise_sd * rng.normal(), 0.0, 1.0);
        for (auto [band, p] : {std::pair{bg::Band::heavy, heavy}, std::pair{bg::Band::neutral, neutral}}) {
          bg::PredictionRecord r;
          r.subject_id = id;
          r.label = static_cast<int>(i % 3 == 0);
          r.score = p;
          r.seed = seed;
          r.band = band;
          r.modality = modality;
          out.predictions.push_back(r);
        }
      }
    }
  }
  return out;
}

}  // namespace fixture
