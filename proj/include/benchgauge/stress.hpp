#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "benchgauge/dataio.hpp"
#include "benchgauge/parallel.hpp"
#include "benchgauge/rng.hpp"
#include "benchgauge/stats.hpp"

// Paired symptom-density stress testing: heavy/neutral slices from chunk
// annotations, per-participant probability shifts, participant bootstrap
// intervals and a sign-flip test on the text-minus-audio gap.

namespace bg {

/// Maps annotator topic scores onto bands. Scores outside every set are
/// ignored, as are mid-set chunks.
struct BandRules {
  std::set<int> heavy{2, 3};
  std::set<int> neutral{0};
  std::set<int> mid{1};
  /// When set, only chunks with one of these self_relevance values count.
  std::optional<std::set<SelfRelevance>> self_relevance;
  /// When set, chunks below this annotator confidence are ignored.
  std::optional<double> min_confidence;
  double min_speech_s = 10.0;

  void validate() const {
    for (int t : heavy) {
      if (neutral.count(t) || mid.count(t)) throw ContractError("band rules: topic score in two bands");
    }
    for (int t : neutral) {
      if (mid.count(t)) throw ContractError("band rules: topic score in two bands");
    }
    if (heavy.empty() || neutral.empty()) throw ContractError("band rules: heavy and neutral sets must be non-empty");
  }
};

struct PairedSlice {
  std::string subject_id;
  std::vector<std::string> heavy_chunks;
  std::vector<std::string> neutral_chunks;
  double heavy_speech_s = 0.0;
  double neutral_speech_s = 0.0;
};

struct DroppedSubject {
  std::string subject_id;
  std::string reason;
};

struct PairedSliceSet {
  std::vector<PairedSlice> pairs;
  std::vector<DroppedSubject> dropped;
};

/// Participant-speech bookkeeping per band; a subject is kept only when both
/// bands reach the minimum duration. Subjects come out sorted by id.
inline PairedSliceSet build_paired_slices(const std::vector<ChunkAnnotation>& annotations,
                                          const BandRules& rules = {}) {
  rules.validate();
  std::map<std::string, std::vector<const ChunkAnnotation*>> by_subject;
  for (const auto& a : annotations) {
    if (!(a.end_s > a.start_s) || a.start_s < 0.0) {
      throw SchemaError("chunk '" + a.chunk_id + "' of '" + a.subject_id + "' has end_s <= start_s");
    }
    by_subject[a.subject_id].push_back(&a);
  }
  PairedSliceSet out;
  for (auto& [subject, chunks] : by_subject) {
    std::sort(chunks.begin(), chunks.end(), [](const ChunkAnnotation* a, const ChunkAnnotation* b) {
      return a->start_s < b->start_s || (a->start_s == b->start_s && a->end_s < b->end_s);
    });
    for (std::size_t i = 1; i < chunks.size(); ++i) {
      if (chunks[i]->start_s < chunks[i - 1]->end_s) {
        throw IntegrityError("subject '" + subject + "': chunks '" + chunks[i - 1]->chunk_id + "' and '" +
                             chunks[i]->chunk_id + "' overlap");
      }
    }
    PairedSlice slice{subject, {}, {}, 0.0, 0.0};
    for (const auto* c : chunks) {
      if (c->speaker != Speaker::participant) continue;
      if (rules.mid.count(c->topic_score)) continue;
      if (rules.self_relevance && !rules.self_relevance->count(c->self_relevance)) continue;
      if (rules.min_confidence && c->confidence < *rules.min_confidence) continue;
      if (rules.heavy.count(c->topic_score)) {
        slice.heavy_chunks.push_back(c->chunk_id);
        slice.heavy_speech_s += c->duration();
      } else if (rules.neutral.count(c->topic_score)) {
        slice.neutral_chunks.push_back(c->chunk_id);
        slice.neutral_speech_s += c->duration();
      }
    }
    const bool heavy_short = slice.heavy_speech_s < rules.min_speech_s;
    const bool neutral_short = slice.neutral_speech_s < rules.min_speech_s;
    if (heavy_short && neutral_short) {
      out.dropped.push_back({subject, "heavy_and_neutral_under_10s"});
    } else if (heavy_short) {
      out.dropped.push_back({subject, "heavy_under_10s"});
    } else if (neutral_short) {
      out.dropped.push_back({subject, "neutral_under_10s"});
    } else {
      out.pairs.push_back(std::move(slice));
    }
  }
  return out;
}

struct PairedDelta {
  std::string subject_id;
  /// p(heavy) - p(neutral) for this participant.
  double delta = 0.0;
};

struct ShiftEstimate {
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int replicates = 0;
  double level = 0.95;
};

/// Mean paired shift with a percentile interval from resampling participants
/// with replacement. Replicate r uses substream r of `seed`.
inline ShiftEstimate paired_shift(const std::vector<PairedDelta>& deltas, int replicates, std::uint64_t seed,
                                  double level = 0.95) {
  if (deltas.empty()) throw ContractError("paired shift of empty input");
  if (deltas.size() < 2) throw ContractError("paired shift needs at least 2 participants");
  if (replicates < 1) throw ContractError("replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ContractError("confidence level must lie in (0,1)");
  std::vector<double> d;
  d.reserve(deltas.size());
  for (const auto& x : deltas) {
    if (!(x.delta >= -1.0 && x.delta <= 1.0)) throw SchemaError("delta outside [-1,1] for '" + x.subject_id + "'");
    d.push_back(x.delta);
  }
  const std::size_t n = d.size();
  std::vector<double> boot(static_cast<std::size_t>(replicates));
  parallel_for(boot.size(), [&](std::size_t r) {
    Rng rng(seed, r);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += d[rng.below(n)];
    boot[r] = sum / static_cast<double>(n);
  });
  std::sort(boot.begin(), boot.end());
  ShiftEstimate est;
  est.n = n;
  est.mean = stats::mean(d);
  est.replicates = replicates;
  est.level = level;
  const double tail = (1.0 - level) / 2.0;
  est.ci_low = stats::quantile_sorted(boot, tail);
  est.ci_high = stats::quantile_sorted(boot, 1.0 - tail);
  return est;
}

enum class Sided { one, two };

inline Sided parse_sided(std::string_view s) {
  if (s == "one") return Sided::one;
  if (s == "two") return Sided::two;
  throw SchemaError("sided must be 'one' or 'two'");
}

struct SignFlipResult {
  double p = 1.0;
  double observed = 0.0;
  std::int64_t assignments = 0;
  bool exhaustive = false;
};

namespace detail {

// Flipped sums within this distance of the observed sum count as ties with
// it; summation order differs between flips, so exact equality is too brittle.
inline double tie_tolerance(std::span<const double> xs) {
  double scale = 0.0;
  for (double x : xs) scale += std::abs(x);
  return 1e-12 * std::max(1.0, scale);
}

inline bool as_extreme(double stat, double observed, Sided sided, double tol) {
  if (sided == Sided::one) return stat >= observed - tol;
  return std::abs(stat) >= std::abs(observed) - tol;
}

}  // namespace detail

/// Monte Carlo sign-flip test on paired gaps. Each assignment flips every
/// gap independently with probability 1/2; p uses the add-one rule
/// (count + 1) / (assignments + 1), so it never falls below 1/(B+1).
inline SignFlipResult signflip_gap_test(std::span<const double> gaps, int assignments, std::uint64_t seed,
                                        Sided sided = Sided::two) {
  if (gaps.size() < 2) throw ContractError("sign-flip test needs at least 2 gaps");
  if (assignments < 1) throw ContractError("assignments must be >= 1");
  double observed_sum = 0.0;
  for (double g : gaps) observed_sum += g;
  const double tol = detail::tie_tolerance(gaps);
  const auto b = static_cast<std::size_t>(assignments);
  std::vector<char> extreme(b, 0);
  parallel_for(b, [&](std::size_t a) {
    Rng rng(seed, a);
    double sum = 0.0;
    for (double g : gaps) sum += rng.coin() ? -g : g;
    extreme[a] = detail::as_extreme(sum, observed_sum, sided, tol) ? 1 : 0;
  });
  const auto count = std::count(extreme.begin(), extreme.end(), char{1});
  SignFlipResult r;
  r.observed = observed_sum / static_cast<double>(gaps.size());
  r.assignments = assignments;
  r.p = static_cast<double>(count + 1) / static_cast<double>(assignments + 1);
  return r;
}

/// Exact sign-flip p-value over all 2^n assignments (identity included).
inline SignFlipResult signflip_exhaustive(std::span<const double> gaps, Sided sided = Sided::two) {
  if (gaps.size() < 2) throw ContractError("sign-flip test needs at least 2 gaps");
  if (gaps.size() > 20) throw ContractError("exhaustive sign-flip limited to 20 gaps");
  const std::size_t n = gaps.size();
  double observed_sum = 0.0;
  for (double g : gaps) observed_sum += g;
  const double tol = detail::tie_tolerance(gaps);
  const std::uint64_t total = std::uint64_t{1} << n;
  std::int64_t count = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += (mask >> i & 1U) ? -gaps[i] : gaps[i];
    count += detail::as_extreme(sum, observed_sum, sided, tol) ? 1 : 0;
  }
  SignFlipResult r;
  r.observed = observed_sum / static_cast<double>(n);
  r.assignments = static_cast<std::int64_t>(total);
  r.exhaustive = true;
  r.p = static_cast<double>(count) / static_cast<double>(total);
  return r;
}

struct GapResult {
  std::size_t n = 0;
  double mean = 0.0;
  double p = 1.0;
};

struct SeedResult {
  std::int64_t seed = 0;
  std::map<std::string, ShiftEstimate> shifts;
  std::optional<GapResult> gap;
};

struct ModalitySummary {
  double mean_shift = 0.0;
  double seed_sd = 0.0;
  /// Seed-averaged interval endpoints.
  double ci_low = 0.0;
  double ci_high = 0.0;
  int seeds_positive = 0;
  int seeds_ci_excludes_zero = 0;
};

struct GapSummary {
  double mean = 0.0;
  double seed_sd = 0.0;
  int seeds_positive = 0;
  std::vector<double> per_seed_mean;
  std::vector<double> per_seed_p;
};

struct StressSummary {
  std::vector<std::int64_t> seeds;
  std::map<std::string, ModalitySummary> modalities;
  std::optional<GapSummary> gap;
};

/// Seed-level mean and standard deviation (n-1) of each modality's shift and
/// of the gap, with the per-seed counts the summary table reports.
inline StressSummary multiseed_summary(const std::vector<SeedResult>& per_seed) {
  if (per_seed.empty()) throw ContractError("multi-seed summary needs at least one seed");
  std::set<std::string> modalities;
  for (const auto& [m, _] : per_seed.front().shifts) modalities.insert(m);
  const bool has_gap = per_seed.front().gap.has_value();
  for (const auto& s : per_seed) {
    std::set<std::string> here;
    for (const auto& [m, _] : s.shifts) here.insert(m);
    if (here != modalities) throw ContractError("seed " + std::to_string(s.seed) + " has a different modality set");
    if (s.gap.has_value() != has_gap) throw ContractError("gap result missing for some seeds");
  }
  StressSummary out;
  for (const auto& s : per_seed) out.seeds.push_back(s.seed);
  for (const auto& m : modalities) {
    std::vector<double> means, lows, highs;
    ModalitySummary ms;
    for (const auto& s : per_seed) {
      const auto& e = s.shifts.at(m);
      means.push_back(e.mean);
      lows.push_back(e.ci_low);
      highs.push_back(e.ci_high);
      ms.seeds_positive += e.mean > 0.0 ? 1 : 0;
      ms.seeds_ci_excludes_zero += (e.ci_low > 0.0 || e.ci_high < 0.0) ? 1 : 0;
    }
    ms.mean_shift = stats::mean(means);
    ms.seed_sd = stats::sample_sd(means);
    ms.ci_low = stats::mean(lows);
    ms.ci_high = stats::mean(highs);
    out.modalities.emplace(m, ms);
  }
  if (has_gap) {
    GapSummary g;
    for (const auto& s : per_seed) {
      g.per_seed_mean.push_back(s.gap->mean);
      g.per_seed_p.push_back(s.gap->p);
      g.seeds_positive += s.gap->mean > 0.0 ? 1 : 0;
    }
    g.mean = stats::mean(g.per_seed_mean);
    g.seed_sd = stats::sample_sd(g.per_seed_mean);
    out.gap = std::move(g);
  }
  return out;
}

struct StressOptions {
  BandRules rules;
  int bootstrap_replicates = 5000;
  int permutation_assignments = 5000;
  /// Seeds to analyse; empty means every seed present in the predictions.
  std::vector<std::int64_t> seeds;
  /// Gap = shift(first) - shift(second) on participants having both.
  std::optional<std::pair<std::string, std::string>> gap_modalities = std::make_pair("text", "audio");
  Sided sided = Sided::two;
  double level = 0.95;
};

struct StressRun {
  PairedSliceSet slices;
  std::vector<SeedResult> per_seed;
  StressSummary summary;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Full stress pipeline: slice eligibility from annotations, per-band subject
/// probabilities from predictions keyed by (subject, band, modality, seed),
/// then per-seed shifts, gap test and the multi-seed summary. Every random
/// stream is derived from (seed, modality) so results are reproducible.
inline StressRun run_stress(const std::vector<ChunkAnnotation>& annotations, const PredictionTable& predictions,
                            const StressOptions& options = {}) {
  StressRun run;
  run.slices = build_paired_slices(annotations, options.rules);
  std::set<std::string> retained;
  for (const auto& p : run.slices.pairs) retained.insert(p.subject_id);

  // (seed, modality, subject) -> per-band (sum, count)
  struct Acc {
    double sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
  };
  std::map<std::int64_t, std::map<std::string, std::map<std::string, Acc>>> acc;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& r = predictions[i];
    if (!r.band || !r.modality || !r.seed) {
      throw SchemaError("stress predictions need band, modality and seed (row " + std::to_string(i + 1) + ")");
    }
    if (!retained.count(r.subject_id)) continue;
    auto& a = acc[*r.seed][*r.modality][r.subject_id];
    const int b = *r.band == Band::heavy ? 0 : 1;
    a.sum[b] += r.score;
    a.count[b] += 1;
  }

  std::vector<std::int64_t> seeds = options.seeds;
  if (seeds.empty()) {
    for (const auto& [s, _] : acc) seeds.push_back(s);
  }
  if (seeds.empty()) throw ContractError("no stress predictions for retained participants");

  for (const auto seed : seeds) {
    const auto it = acc.find(seed);
    if (it == acc.end()) throw ContractError("no stress predictions for seed " + std::to_string(seed));
    SeedResult result;
    result.seed = seed;
    std::map<std::string, std::map<std::string, double>> deltas_by_modality;
    for (const auto& [modality, subjects] : it->second) {
      std::vector<PairedDelta> deltas;
      for (const auto& [subject, a] : subjects) {
        if (a.count[0] == 0 || a.count[1] == 0) continue;
        const double d = a.sum[0] / a.count[0] - a.sum[1] / a.count[1];
        deltas.push_back({subject, d});
        deltas_by_modality[modality][subject] = d;
      }
      const auto stream = substream_seed(static_cast<std::uint64_t>(seed), detail::fnv1a(modality));
      result.shifts.emplace(modality, paired_shift(deltas, options.bootstrap_replicates, stream, options.level));
    }
    if (options.gap_modalities) {
      const auto& [first, second] = *options.gap_modalities;
      const auto a = deltas_by_modality.find(first);
      const auto b = deltas_by_modality.find(second);
      if (a != deltas_by_modality.end() && b != deltas_by_modality.end()) {
        std::vector<double> gaps;
        for (const auto& [subject, d] : a->second) {
          const auto other = b->second.find(subject);
          if (other != b->second.end()) gaps.push_back(d - other->second);
        }
        const auto stream = substream_seed(static_cast<std::uint64_t>(seed), detail::fnv1a("gap:" + first + "-" + second));
        const auto test = signflip_gap_test(gaps, options.permutation_assignments, stream, options.sided);
        result.gap = GapResult{gaps.size(), test.observed, test.p};
      }
    }
    run.per_seed.push_back(std::move(result));
  }
  run.summary = multiseed_summary(run.per_seed);
  return run;
}

}  // namespace bg
