#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "benchgauge/csv.hpp"
#include "benchgauge/error.hpp"
#include "benchgauge/metrics.hpp"

namespace bg {

enum class Format { csv, jsonl };

inline Format parse_format(std::string_view s) {
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw SchemaError("unknown format '" + std::string(s) + "'");
}

enum class Split { train, dev, test };
enum class Band { heavy, neutral };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "";
}
inline std::string_view to_string(Band b) { return b == Band::heavy ? "heavy" : "neutral"; }

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  return std::nullopt;
}
inline std::optional<Band> parse_band(std::string_view s) {
  if (s == "heavy") return Band::heavy;
  if (s == "neutral") return Band::neutral;
  return std::nullopt;
}

struct PredictionRecord {
  std::string subject_id;
  int label = 0;
  double score = 0.0;
  std::optional<std::string> turn_id;
  std::optional<std::string> config_id;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> fold;
  std::optional<Split> split;
  std::optional<Band> band;
  std::optional<std::string> modality;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

using PredictionTable = std::vector<PredictionRecord>;

/// One subject after pooling turn rows: a single score and its label.
struct SubjectRow {
  std::string subject_id;
  int label = 0;
  double score = 0.0;
};

using SubjectTable = std::vector<SubjectRow>;

inline ScoredLabels to_scored(const SubjectTable& t) {
  std::vector<double> s;
  std::vector<int> y;
  s.reserve(t.size());
  y.reserve(t.size());
  for (const auto& r : t) {
    s.push_back(r.score);
    y.push_back(r.label);
  }
  return ScoredLabels(std::move(s), std::move(y));
}

struct FeatureRecord {
  std::string subject_id;
  std::string turn_id;
  int label = 0;
  std::string modality_block;
  std::vector<double> features;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

using FeatureTable = std::vector<FeatureRecord>;

struct ManifestEntry {
  std::string subject_id;
  Split split = Split::train;
  std::optional<std::int64_t> fold;
  std::optional<std::string> probe_id;
};

using SplitManifest = std::vector<ManifestEntry>;

struct SeverityRow {
  std::string subject_id;
  std::int64_t severity = 0;
};

enum class Speaker { participant, interviewer };
enum class SelfRelevance { self, other, generic, negated };

struct ChunkAnnotation {
  std::string subject_id;
  std::string chunk_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Speaker speaker = Speaker::participant;
  int topic_score = 0;
  SelfRelevance self_relevance = SelfRelevance::self;
  double confidence = 1.0;

  double duration() const noexcept { return end_s - start_s; }
};

namespace detail {

// Uniform field access over a CSV record (by header position) or a JSON
// object, so every schema is parsed by one routine regardless of encoding.
class CsvFields {
 public:
  CsvFields(const std::unordered_map<std::string, std::size_t>& index, const csv::Row& row,
            std::size_t rowno)
      : index_(index), row_(row), rowno_(rowno) {}

  bool has(const std::string& key) const {
    const auto it = index_.find(key);
    return it != index_.end() && !row_[it->second].empty();
  }
  std::string str(const std::string& key) const { return row_[at(key)]; }
  double real(const std::string& key) const {
    const auto v = csv::parse_double(row_[at(key)]);
    if (!v) throw LoadError("column '" + key + "' is not a number", rowno_);
    return *v;
  }
  long long integer(const std::string& key) const {
    const auto v = csv::parse_int(row_[at(key)]);
    if (!v) throw LoadError("column '" + key + "' is not an integer", rowno_);
    return *v;
  }

 private:
  std::size_t at(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end() || row_[it->second].empty()) {
      throw LoadError("missing value for '" + key + "'", rowno_);
    }
    return it->second;
  }

  const std::unordered_map<std::string, std::size_t>& index_;
  const csv::Row& row_;
  std::size_t rowno_;
};

class JsonFields {
 public:
  JsonFields(const nlohmann::json& obj, std::size_t rowno) : obj_(obj), rowno_(rowno) {}

  bool has(const std::string& key) const {
    const auto it = obj_.find(key);
    return it != obj_.end() && !it->is_null();
  }
  std::string str(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw LoadError("key '" + key + "' must be a string", rowno_);
    return v.get<std::string>();
  }
  double real(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw LoadError("key '" + key + "' must be a number", rowno_);
    return v.get<double>();
  }
  long long integer(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw LoadError("key '" + key + "' must be an integer", rowno_);
    return v.get<long long>();
  }

 private:
  const nlohmann::json& at(const std::string& key) const {
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) throw LoadError("missing value for '" + key + "'", rowno_);
    return *it;
  }

  const nlohmann::json& obj_;
  std::size_t rowno_;
};

/// Column contract for one file kind. `prefix_columns` admits a numbered
/// family such as f0..f{d-1}.
struct Schema {
  std::string name;
  std::vector<std::string> required;
  std::vector<std::string> optional;
  std::string numbered_prefix;

  bool known(const std::string& col) const {
    if (std::find(required.begin(), required.end(), col) != required.end()) return true;
    if (std::find(optional.begin(), optional.end(), col) != optional.end()) return true;
    if (!numbered_prefix.empty() && col.size() > numbered_prefix.size() &&
        col.compare(0, numbered_prefix.size(), numbered_prefix) == 0) {
      return csv::parse_int(std::string_view(col).substr(numbered_prefix.size())).has_value();
    }
    return false;
  }
};

inline void check_columns(const Schema& schema, const std::vector<std::string>& columns,
                          std::size_t rowno) {
  for (const auto& req : schema.required) {
    if (std::find(columns.begin(), columns.end(), req) == columns.end()) {
      if (rowno == 0) throw SchemaError(schema.name + ": missing column '" + req + "'");
      throw LoadError(schema.name + ": missing key '" + req + "'", rowno);
    }
  }
  for (const auto& col : columns) {
    if (!schema.known(col)) {
      if (rowno == 0) throw SchemaError(schema.name + ": unknown column '" + col + "'");
      throw LoadError(schema.name + ": unknown key '" + col + "'", rowno);
    }
  }
}

/// Calls fn(fields, rowno, columns) for every data row. Row numbers are
/// 1-based and count data rows only (the CSV header is row 0).
template <typename Fn>
void for_each_record(std::istream& in, Format format, const Schema& schema, Fn&& fn) {
  if (format == Format::csv) {
    csv::Row header;
    std::size_t line = 0;
    if (!csv::read_row(in, header, line)) throw SchemaError(schema.name + ": empty input, header row required");
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    check_columns(schema, header, 0);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (!index.emplace(header[i], i).second) {
        throw SchemaError(schema.name + ": duplicate column '" + header[i] + "'");
      }
    }
    csv::Row row;
    std::size_t rowno = 0;
    while (csv::read_row(in, row, line)) {
      if (csv::is_blank(row)) continue;
      ++rowno;
      if (row.size() != header.size()) {
        throw LoadError(schema.name + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(row.size()),
                        rowno);
      }
      fn(CsvFields(index, row, rowno), rowno, header);
    }
    return;
  }
  std::string text;
  std::size_t rowno = 0;
  while (std::getline(in, text)) {
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    ++rowno;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      throw LoadError(schema.name + ": malformed JSON", rowno);
    }
    if (!obj.is_object()) throw LoadError(schema.name + ": JSON line is not an object", rowno);
    std::vector<std::string> keys;
    for (auto it = obj.begin(); it != obj.end(); ++it) keys.push_back(it.key());
    check_columns(schema, keys, rowno);
    fn(JsonFields(obj, rowno), rowno, keys);
  }
}

inline int parse_label(long long v, std::size_t rowno) {
  if (v != 0 && v != 1) throw LoadError("non-binary label", rowno);
  return static_cast<int>(v);
}

inline std::string nonempty_id(std::string s, const char* what, std::size_t rowno) {
  if (s.empty()) throw LoadError(std::string("empty ") + what, rowno);
  return s;
}

}  // namespace detail

inline const detail::Schema& prediction_schema() {
  static const detail::Schema schema{
      "predictions",
      {"subject_id", "label", "score"},
      {"turn_id", "config_id", "seed", "fold", "split", "band", "modality"},
      {}};
  return schema;
}

/// Identity of a prediction row; two rows with the same key are a load error.
/// Band and modality are part of the key so per-band files validate.
inline auto prediction_key(const PredictionRecord& r) {
  return std::make_tuple(r.subject_id, r.turn_id, r.config_id, r.seed, r.fold, r.split, r.band,
                         r.modality);
}

inline PredictionTable load_predictions(std::istream& in, Format format) {
  PredictionTable table;
  std::set<decltype(prediction_key(PredictionRecord{}))> seen;
  detail::for_each_record(in, format, prediction_schema(), [&](const auto& f, std::size_t rowno, const auto&) {
    PredictionRecord r;
    r.subject_id = detail::nonempty_id(f.str("subject_id"), "subject_id", rowno);
    r.label = detail::parse_label(f.integer("label"), rowno);
    r.score = f.real("score");
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
      throw LoadError("score out of range", rowno);
    }
    if (f.has("turn_id")) r.turn_id = f.str("turn_id");
    if (f.has("config_id")) r.config_id = f.str("config_id");
    if (f.has("seed")) r.seed = f.integer("seed");
    if (f.has("fold")) r.fold = f.integer("fold");
    if (f.has("split")) {
      r.split = parse_split(f.str("split"));
      if (!r.split) throw LoadError("split must be train, dev or test", rowno);
    }
    if (f.has("band")) {
      r.band = parse_band(f.str("band"));
      if (!r.band) throw LoadError("band must be heavy or neutral", rowno);
    }
    if (f.has("modality")) r.modality = f.str("modality");
    if (!seen.insert(prediction_key(r)).second) {
      throw LoadError("duplicate prediction key for subject '" + r.subject_id + "'", rowno);
    }
    table.push_back(std::move(r));
  });
  return table;
}

inline PredictionTable load_predictions(std::string_view text, Format format) {
  std::istringstream in{std::string(text)};
  return load_predictions(in, format);
}

/// Writes the table with the columns that at least one row populates.
inline void write_predictions(std::ostream& out, const PredictionTable& table, Format format) {
  bool turn = false, config = false, seed = false, fold = false, split = false, band = false,
       modality = false;
  for (const auto& r : table) {
    turn |= r.turn_id.has_value();
    config |= r.config_id.has_value();
    seed |= r.seed.has_value();
    fold |= r.fold.has_value();
    split |= r.split.has_value();
    band |= r.band.has_value();
    modality |= r.modality.has_value();
  }
  if (format == Format::csv) {
    csv::Row header{"subject_id", "label", "score"};
    if (turn) header.emplace_back("turn_id");
    if (config) header.emplace_back("config_id");
    if (seed) header.emplace_back("seed");
    if (fold) header.emplace_back("fold");
    if (split) header.emplace_back("split");
    if (band) header.emplace_back("band");
    if (modality) header.emplace_back("modality");
    csv::write_row(out, header);
    for (const auto& r : table) {
      csv::Row row{r.subject_id, std::to_string(r.label), csv::format_double(r.score)};
      if (turn) row.push_back(r.turn_id.value_or(""));
      if (config) row.push_back(r.config_id.value_or(""));
      if (seed) row.push_back(r.seed ? std::to_string(*r.seed) : "");
      if (fold) row.push_back(r.fold ? std::to_string(*r.fold) : "");
      if (split) row.push_back(r.split ? std::string(to_string(*r.split)) : "");
      if (band) row.push_back(r.band ? std::string(to_string(*r.band)) : "");
      if (modality) row.push_back(r.modality.value_or(""));
      csv::write_row(out, row);
    }
    return;
  }
  for (const auto& r : table) {
    nlohmann::json obj;
    obj["subject_id"] = r.subject_id;
    obj["label"] = r.label;
    obj["score"] = r.score;
    if (r.turn_id) obj["turn_id"] = *r.turn_id;
    if (r.config_id) obj["config_id"] = *r.config_id;
    if (r.seed) obj["seed"] = *r.seed;
    if (r.fold) obj["fold"] = *r.fold;
    if (r.split) obj["split"] = std::string(to_string(*r.split));
    if (r.band) obj["band"] = std::string(to_string(*r.band));
    if (r.modality) obj["modality"] = *r.modality;
    out << obj.dump() << '\n';
  }
}

inline FeatureTable load_features(std::istream& in, Format format) {
  static const detail::Schema schema{
      "features", {"subject_id", "turn_id", "label", "modality_block"}, {}, "f"};
  FeatureTable table;
  std::optional<std::size_t> dim;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  detail::for_each_record(in, format, schema, [&](const auto& f, std::size_t rowno, const auto& cols) {
    std::size_t d = 0;
    for (const auto& c : cols) d += (schema.known(c) && c.size() > 1 && c[0] == 'f' && c != "fold") ? 1 : 0;
    if (d == 0) throw LoadError("features: no feature columns", rowno);
    if (dim && *dim != d) throw LoadError("features: dimensionality changes", rowno);
    dim = d;
    FeatureRecord r;
    r.subject_id = detail::nonempty_id(f.str("subject_id"), "subject_id", rowno);
    r.turn_id = f.str("turn_id");
    r.label = detail::parse_label(f.integer("label"), rowno);
    r.modality_block = detail::nonempty_id(f.str("modality_block"), "modality_block", rowno);
    r.features.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const std::string key = "f" + std::to_string(j);
      if (!f.has(key)) throw LoadError("features: missing " + key, rowno);
      r.features[j] = f.real(key);
      if (!std::isfinite(r.features[j])) throw LoadError("features: non-finite value in " + key, rowno);
    }
    if (!seen.emplace(r.subject_id, r.turn_id, r.modality_block).second) {
      throw LoadError("features: duplicate (subject_id, turn_id, modality_block)", rowno);
    }
    table.push_back(std::move(r));
  });
  return table;
}

inline void write_features(std::ostream& out, const FeatureTable& table, Format format) {
  const std::size_t d = table.empty() ? 0 : table.front().features.size();
  if (format == Format::csv) {
    csv::Row header{"subject_id", "turn_id", "label", "modality_block"};
    for (std::size_t j = 0; j < d; ++j) header.push_back("f" + std::to_string(j));
    csv::write_row(out, header);
    for (const auto& r : table) {
      csv::Row row{r.subject_id, r.turn_id, std::to_string(r.label), r.modality_block};
      for (double v : r.features) row.push_back(csv::format_double(v));
      csv::write_row(out, row);
    }
    return;
  }
  for (const auto& r : table) {
    nlohmann::json obj;
    obj["subject_id"] = r.subject_id;
    obj["turn_id"] = r.turn_id;
    obj["label"] = r.label;
    obj["modality_block"] = r.modality_block;
    for (std::size_t j = 0; j < r.features.size(); ++j) obj["f" + std::to_string(j)] = r.features[j];
    out << obj.dump() << '\n';
  }
}

inline SplitManifest load_manifest(std::istream& in, Format format) {
  static const detail::Schema schema{"manifest", {"subject_id", "split"}, {"fold", "probe_id"}, {}};
  SplitManifest m;
  detail::for_each_record(in, format, schema, [&](const auto& f, std::size_t rowno, const auto&) {
    ManifestEntry e;
    e.subject_id = detail::nonempty_id(f.str("subject_id"), "subject_id", rowno);
    const auto split = parse_split(f.str("split"));
    if (!split) throw LoadError("manifest: split must be train, dev or test", rowno);
    e.split = *split;
    if (f.has("fold")) e.fold = f.integer("fold");
    if (f.has("probe_id")) e.probe_id = f.str("probe_id");
    m.push_back(std::move(e));
  });
  return m;
}

inline void write_manifest(std::ostream& out, const SplitManifest& m) {
  bool fold = false, probe = false;
  for (const auto& e : m) {
    fold |= e.fold.has_value();
    probe |= e.probe_id.has_value();
  }
  csv::Row header{"subject_id", "split"};
  if (fold) header.emplace_back("fold");
  if (probe) header.emplace_back("probe_id");
  csv::write_row(out, header);
  for (const auto& e : m) {
    csv::Row row{e.subject_id, std::string(to_string(e.split))};
    if (fold) row.push_back(e.fold ? std::to_string(*e.fold) : "");
    if (probe) row.push_back(e.probe_id.value_or(""));
    csv::write_row(out, row);
  }
}

inline std::vector<SeverityRow> load_severity(std::istream& in, Format format) {
  static const detail::Schema schema{"severity", {"subject_id", "severity"}, {}, {}};
  std::vector<SeverityRow> rows;
  std::set<std::string> seen;
  detail::for_each_record(in, format, schema, [&](const auto& f, std::size_t rowno, const auto&) {
    SeverityRow r;
    r.subject_id = detail::nonempty_id(f.str("subject_id"), "subject_id", rowno);
    r.severity = f.integer("severity");
    if (r.severity < 0) throw LoadError("severity: negative value", rowno);
    if (!seen.insert(r.subject_id).second) throw LoadError("severity: duplicate subject_id", rowno);
    rows.push_back(std::move(r));
  });
  return rows;
}

inline std::vector<ChunkAnnotation> load_annotations(std::istream& in, Format format) {
  static const detail::Schema schema{
      "annotations",
      {"subject_id", "chunk_id", "start_s", "end_s", "speaker", "topic_score"},
      {"self_relevance", "confidence"},
      {}};
  std::vector<ChunkAnnotation> rows;
  detail::for_each_record(in, format, schema, [&](const auto& f, std::size_t rowno, const auto&) {
    ChunkAnnotation a;
    a.subject_id = detail::nonempty_id(f.str("subject_id"), "subject_id", rowno);
    a.chunk_id = f.str("chunk_id");
    a.start_s = f.real("start_s");
    a.end_s = f.real("end_s");
    if (!std::isfinite(a.start_s) || !std::isfinite(a.end_s) || a.start_s < 0.0 || !(a.end_s > a.start_s)) {
      throw LoadError("annotations: need end_s > start_s >= 0", rowno);
    }
    const std::string speaker = f.str("speaker");
    if (speaker == "participant") {
      a.speaker = Speaker::participant;
    } else if (speaker == "interviewer") {
      a.speaker = Speaker::interviewer;
    } else {
      throw LoadError("annotations: speaker must be participant or interviewer", rowno);
    }
    const long long topic = f.integer("topic_score");
    if (topic < 0 || topic > 3) throw LoadError("annotations: topic_score must be 0..3", rowno);
    a.topic_score = static_cast<int>(topic);
    if (f.has("self_relevance")) {
      const std::string rel = f.str("self_relevance");
      if (rel == "self") a.self_relevance = SelfRelevance::self;
      else if (rel == "other") a.self_relevance = SelfRelevance::other;
      else if (rel == "generic") a.self_relevance = SelfRelevance::generic;
      else if (rel == "negated") a.self_relevance = SelfRelevance::negated;
      else throw LoadError("annotations: unknown self_relevance '" + rel + "'", rowno);
    }
    if (f.has("confidence")) {
      a.confidence = f.real("confidence");
      if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) {
        throw LoadError("annotations: confidence outside [0,1]", rowno);
      }
    }
    rows.push_back(std::move(a));
  });
  return rows;
}

/// CV leaderboard file: config_id,cv_score.
inline std::map<std::string, double> load_cv_scores(std::istream& in, Format format) {
  static const detail::Schema schema{"cv scores", {"config_id", "cv_score"}, {}, {}};
  std::map<std::string, double> out;
  detail::for_each_record(in, format, schema, [&](const auto& f, std::size_t rowno, const auto&) {
    const std::string id = detail::nonempty_id(f.str("config_id"), "config_id", rowno);
    const double v = f.real("cv_score");
    if (!std::isfinite(v)) throw LoadError("cv scores: non-finite cv_score", rowno);
    if (!out.emplace(id, v).second) throw LoadError("cv scores: duplicate config_id '" + id + "'", rowno);
  });
  return out;
}

/// 1 where severity >= cutoff.
inline std::vector<int> binarize_severity(std::span<const std::int64_t> severity, std::int64_t cutoff) {
  std::vector<int> out(severity.size());
  for (std::size_t i = 0; i < severity.size(); ++i) {
    if (severity[i] < 0) throw SchemaError("negative severity at index " + std::to_string(i));
    out[i] = severity[i] >= cutoff ? 1 : 0;
  }
  return out;
}

enum class Pooler { prob_mean, mean, meanstd };

inline Pooler parse_pooler(std::string_view s) {
  if (s == "prob_mean") return Pooler::prob_mean;
  if (s == "mean") return Pooler::mean;
  if (s == "meanstd") return Pooler::meanstd;
  throw SchemaError("unknown pooler '" + std::string(s) + "'");
}

inline std::string_view to_string(Pooler p) {
  switch (p) {
    case Pooler::prob_mean: return "prob_mean";
    case Pooler::mean: return "mean";
    case Pooler::meanstd: return "meanstd";
  }
  return "";
}

/// Averages turn probabilities into one score per subject. Subjects appear in
/// order of first occurrence.
inline SubjectTable pool_to_subject(const PredictionTable& table, Pooler pooler = Pooler::prob_mean) {
  if (pooler != Pooler::prob_mean) {
    throw ContractError("prediction tables pool with prob_mean only");
  }
  SubjectTable out;
  std::unordered_map<std::string, std::size_t> where;
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (const auto& r : table) {
    auto [it, fresh] = where.try_emplace(r.subject_id, out.size());
    if (fresh) {
      out.push_back({r.subject_id, r.label, 0.0});
      sums.push_back(0.0);
      counts.push_back(0);
    } else if (out[it->second].label != r.label) {
      throw IntegrityError("conflicting labels for subject '" + r.subject_id + "'");
    }
    sums[it->second] += r.score;
    counts[it->second] += 1;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].score = std::clamp(sums[i] / static_cast<double>(counts[i]), 0.0, 1.0);
  }
  return out;
}

/// Per-subject pooled feature vectors for every modality block.
struct PooledFeatures {
  std::vector<std::string> subject_ids;
  std::vector<int> labels;
  /// blocks[name][i] is the pooled vector of subject_ids[i].
  std::map<std::string, std::vector<std::vector<double>>> blocks;

  std::size_t block_dim(const std::string& name) const {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw ContractError("unknown modality block '" + name + "'");
    return it->second.empty() ? 0 : it->second.front().size();
  }
};

/// Pools turn-level feature rows per (subject, block). `mean` averages each
/// dimension; `meanstd` appends the population standard deviation (divisor n)
/// so the output has twice the input dimensionality.
inline PooledFeatures pool_features(const FeatureTable& table, Pooler pooler) {
  if (pooler == Pooler::prob_mean) throw ContractError("feature tables pool with mean or meanstd");
  PooledFeatures out;
  std::unordered_map<std::string, std::size_t> where;
  std::set<std::string> block_names;
  std::optional<std::size_t> dim;
  for (const auto& r : table) {
    if (dim && r.features.size() != *dim) throw SchemaError("feature rows differ in dimensionality");
    dim = r.features.size();
    auto [it, fresh] = where.try_emplace(r.subject_id, out.subject_ids.size());
    if (fresh) {
      out.subject_ids.push_back(r.subject_id);
      out.labels.push_back(r.label);
    } else if (out.labels[it->second] != r.label) {
      throw IntegrityError("conflicting labels for subject '" + r.subject_id + "'");
    }
    block_names.insert(r.modality_block);
  }
  const std::size_t n = out.subject_ids.size();
  const std::size_t d = dim.value_or(0);
  for (const auto& name : block_names) {
    std::vector<std::vector<double>> sum(n, std::vector<double>(d, 0.0));
    std::vector<std::size_t> count(n, 0);
    for (const auto& r : table) {
      if (r.modality_block != name) continue;
      const std::size_t i = where.at(r.subject_id);
      for (std::size_t j = 0; j < d; ++j) sum[i][j] += r.features[j];
      ++count[i];
    }
    std::vector<std::vector<double>> pooled(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (count[i] == 0) {
        throw IntegrityError("subject '" + out.subject_ids[i] + "' has no rows in block '" + name + "'");
      }
      const double c = static_cast<double>(count[i]);
      std::vector<double> mean(d);
      for (std::size_t j = 0; j < d; ++j) mean[j] = sum[i][j] / c;
      pooled[i] = mean;
      if (pooler == Pooler::meanstd) pooled[i].resize(2 * d, 0.0);
    }
    if (pooler == Pooler::meanstd) {
      std::vector<std::vector<double>> ss(n, std::vector<double>(d, 0.0));
      for (const auto& r : table) {
        if (r.modality_block != name) continue;
        const std::size_t i = where.at(r.subject_id);
        for (std::size_t j = 0; j < d; ++j) {
          const double dev = r.features[j] - pooled[i][j];
          ss[i][j] += dev * dev;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          pooled[i][d + j] = std::sqrt(ss[i][j] / static_cast<double>(count[i]));
        }
      }
    }
    out.blocks.emplace(name, std::move(pooled));
  }
  return out;
}

}  // namespace bg
