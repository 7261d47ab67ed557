#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace rnphi {

using json = nlohmann::json;
using TokenMatrix = Eigen::MatrixXd;

enum class ItemKind { stimulus, response };
enum class Task { Hinting, FalseBelief, Irony, StrangeStories2, StrangeStories3 };
enum class SpanKind { Entire, Complement, MSV };
enum class PermutationKind { Temporal, Spatio };

inline const char* to_string(ItemKind k) { return k == ItemKind::stimulus ? "stimulus" : "response"; }

inline const char* to_string(Task t) {
  switch (t) {
    case Task::Hinting: return "Hinting";
    case Task::FalseBelief: return "FalseBelief";
    case Task::Irony: return "Irony";
    case Task::StrangeStories2: return "StrangeStories2";
    case Task::StrangeStories3: return "StrangeStories3";
  }
  return "";
}

inline const char* to_string(SpanKind s) {
  switch (s) {
    case SpanKind::Entire: return "Entire";
    case SpanKind::Complement: return "Complement";
    case SpanKind::MSV: return "MSV";
  }
  return "";
}

inline const char* to_string(PermutationKind p) { return p == PermutationKind::Temporal ? "Temporal" : "Spatio"; }

inline ItemKind parse_item_kind(const std::string& s) {
  if (s == "stimulus") return ItemKind::stimulus;
  if (s == "response") return ItemKind::response;
  throw ValidationError("unknown item kind '" + s + "'");
}

inline Task parse_task(const std::string& s) {
  for (Task t : {Task::Hinting, Task::FalseBelief, Task::Irony, Task::StrangeStories2, Task::StrangeStories3})
    if (s == to_string(t)) return t;
  throw ValidationError("unknown task '" + s + "'");
}

inline SpanKind parse_span_kind(const std::string& s) {
  for (SpanKind k : {SpanKind::Entire, SpanKind::Complement, SpanKind::MSV})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown linguistic span '" + s + "'");
}

inline PermutationKind parse_permutation(const std::string& s) {
  if (s == "Temporal") return PermutationKind::Temporal;
  if (s == "Spatio") return PermutationKind::Spatio;
  throw ValidationError("unknown permutation control '" + s + "'");
}

/// Number of score categories a task uses.
inline int score_levels(Task t) { return t == Task::StrangeStories3 ? 3 : 2; }

struct ItemRecord {
  std::string id;
  ItemKind kind = ItemKind::response;
  Task task = Task::Hinting;
  std::string sheet;
  std::string stimulus_id;
  std::optional<int> score;
  bool augmented = false;
  int n_tokens = 0;
  std::map<int, std::string> blobs;  // layer number -> path relative to the bundle root
};

struct RepresentationBundle {
  std::filesystem::path root;
  std::string model_name;
  int embedding_dim = 0;
  std::vector<int> layer_indices;
  std::optional<int> two_thirds_layer;
  std::vector<ItemRecord> items;

  const ItemRecord& item(const std::string& id) const {
    for (const auto& it : items)
      if (it.id == id) return it;
    throw LoadError("no item '" + id + "'");
  }

  /// Label used in result rows: position among the 12 evenly sampled layers,
  /// or "2/3" for the extra two-thirds-depth layer.
  std::string layer_label(int layer) const {
    const bool extra = two_thirds_layer && *two_thirds_layer == layer && layer_indices.size() == 13;
    if (extra) return "2/3";
    int pos = 0;
    for (int l : layer_indices) {
      if (l == layer) return std::to_string(pos);
      if (!(two_thirds_layer && *two_thirds_layer == l && layer_indices.size() == 13)) ++pos;
    }
    throw ValidationError("layer " + std::to_string(layer) + " not in bundle");
  }

  /// Reads one (item, layer) blob as an n_tokens x D matrix in double precision.
  TokenMatrix matrix(const ItemRecord& it, int layer) const {
    auto f = it.blobs.find(layer);
    if (f == it.blobs.end())
      throw LoadError("item '" + it.id + "' has no blob for layer " + std::to_string(layer));
    const auto path = root / f->second;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("missing blob for item '" + it.id + "' layer " + std::to_string(layer) + ": " + path.string());
    const std::size_t count = static_cast<std::size_t>(it.n_tokens) * embedding_dim;
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() != count * 4)
      throw ValidationError("blob for item '" + it.id + "' layer " + std::to_string(layer) + " has " +
                            std::to_string(raw.size()) + " bytes, expected " + std::to_string(count * 4));
    TokenMatrix m(it.n_tokens, embedding_dim);
    for (std::size_t k = 0; k < count; ++k) {
      std::uint32_t u;
      std::memcpy(&u, raw.data() + 4 * k, 4);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
      m(static_cast<Eigen::Index>(k / embedding_dim), static_cast<Eigen::Index>(k % embedding_dim)) =
          static_cast<double>(std::bit_cast<float>(u));
    }
    return m;
  }
};

/// Writes a matrix as little-endian float32, token-major.
inline void write_blob(const std::filesystem::path& path, const TokenMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j)));
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
      out.write(reinterpret_cast<const char*>(&u), 4);
    }
  if (!out) throw IoError("cannot write " + path.string());
}

namespace detail {

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(ctx + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses and validates a manifest document (no blob access).
inline RepresentationBundle parse_manifest(const json& j, const std::filesystem::path& root) {
  RepresentationBundle b;
  b.root = root;
  if (!j.is_object()) throw ValidationError("manifest must be an object");
  b.model_name = detail::field<std::string>(j, "model_name", "manifest");
  b.embedding_dim = detail::field<int>(j, "embedding_dim", "manifest");
  if (b.embedding_dim < 1) throw ValidationError("embedding_dim must be positive");
  b.layer_indices = detail::field<std::vector<int>>(j, "layer_indices", "manifest");
  if (b.layer_indices.size() != 13 && b.layer_indices.size() != 12)
    throw ValidationError("layer_indices must hold 13 entries (12 when the two-thirds layer coincides)");
  for (std::size_t i = 1; i < b.layer_indices.size(); ++i)
    if (b.layer_indices[i] <= b.layer_indices[i - 1]) throw ValidationError("layer_indices must be strictly increasing");
  if (j.contains("two_thirds_layer") && !j["two_thirds_layer"].is_null()) {
    b.two_thirds_layer = detail::field<int>(j, "two_thirds_layer", "manifest");
    if (std::find(b.layer_indices.begin(), b.layer_indices.end(), *b.two_thirds_layer) == b.layer_indices.end())
      throw ValidationError("two_thirds_layer is not among layer_indices");
  }
  if (!j.contains("items") || !j["items"].is_array()) throw ValidationError("manifest: items must be an array");
  std::map<std::string, int> seen;
  for (const auto& ji : j["items"]) {
    ItemRecord it;
    it.id = detail::field<std::string>(ji, "id", "item");
    const std::string ctx = "item '" + it.id + "'";
    if (seen.count(it.id)) throw ValidationError(ctx + ": duplicate id");
    seen[it.id] = 1;
    it.kind = parse_item_kind(detail::field<std::string>(ji, "kind", ctx));
    it.task = parse_task(detail::field<std::string>(ji, "task", ctx));
    it.sheet = detail::field<std::string>(ji, "sheet", ctx);
    it.stimulus_id = detail::field<std::string>(ji, "stimulus_id", ctx);
    if (ji.contains("score") && !ji["score"].is_null()) it.score = detail::field<int>(ji, "score", ctx);
    it.augmented = detail::field<bool>(ji, "augmented", ctx);
    it.n_tokens = detail::field<int>(ji, "n_tokens", ctx);
    if (it.n_tokens < 1) throw ValidationError(ctx + ": n_tokens must be positive");
    if (it.kind == ItemKind::response) {
      if (!it.score) throw ValidationError(ctx + ": responses need a score");
      if (*it.score < 0 || *it.score >= score_levels(it.task))
        throw ValidationError(ctx + ": score " + std::to_string(*it.score) + " invalid for task " + to_string(it.task));
    } else {
      if (it.score) throw ValidationError(ctx + ": stimuli carry no score");
      if (it.augmented) throw ValidationError(ctx + ": only responses may be augmented");
    }
    if (!ji.contains("blobs") || !ji["blobs"].is_object()) throw ValidationError(ctx + ": blobs must be an object");
    for (auto& [k, v] : ji["blobs"].items()) {
      int layer;
      try {
        std::size_t pos = 0;
        layer = std::stoi(k, &pos);
        if (pos != k.size()) throw std::invalid_argument(k);
      } catch (const std::exception&) {
        throw ValidationError(ctx + ": blob key '" + k + "' is not a layer number");
      }
      if (std::find(b.layer_indices.begin(), b.layer_indices.end(), layer) == b.layer_indices.end())
        throw ValidationError(ctx + ": blob for undeclared layer " + k);
      if (!v.is_string()) throw ValidationError(ctx + ": blob path must be a string");
      it.blobs[layer] = v.get<std::string>();
    }
    for (int l : b.layer_indices)
      if (!it.blobs.count(l)) throw LoadError(ctx + ": missing blob for layer " + std::to_string(l));
    b.items.push_back(std::move(it));
  }
  for (const auto& it : b.items)
    if (it.kind == ItemKind::response) {
      auto s = std::find_if(b.items.begin(), b.items.end(), [&](const ItemRecord& x) {
        return x.kind == ItemKind::stimulus && x.id == it.stimulus_id;
      });
      if (s == b.items.end()) throw ValidationError("item '" + it.id + "': unknown stimulus '" + it.stimulus_id + "'");
      if (s->task != it.task) throw ValidationError("item '" + it.id + "': task differs from its stimulus");
    }
  return b;
}

/// Loads `dir/manifest.json` and checks every blob's size.
inline RepresentationBundle load_bundle(const std::filesystem::path& dir) {
  auto b = parse_manifest(detail::read_json_file(dir / "manifest.json"), dir);
  for (const auto& it : b.items)
    for (const auto& [layer, rel] : it.blobs) {
      const auto p = dir / rel;
      std::error_code ec;
      const auto size = std::filesystem::file_size(p, ec);
      if (ec) throw LoadError("missing blob for item '" + it.id + "' layer " + std::to_string(layer) + ": " + p.string());
      const auto want = static_cast<std::uintmax_t>(it.n_tokens) * b.embedding_dim * 4;
      if (size != want)
        throw ValidationError("blob for item '" + it.id + "' layer " + std::to_string(layer) + " has " +
                              std::to_string(size) + " bytes, expected " + std::to_string(want));
    }
  return b;
}

struct Span {
  int p = 0, q = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct StimulusSpans {
  std::vector<Span> complement, msv, complement_context, msv_context;

  const std::vector<Span>& interested(SpanKind k) const { return k == SpanKind::MSV ? msv : complement; }
  const std::vector<Span>& context(SpanKind k) const { return k == SpanKind::MSV ? msv_context : complement_context; }
};

using SpanAnnotationSet = std::map<std::string, StimulusSpans>;

/// Checks spans against the token count of their stimulus.
inline void check_spans(const std::string& stim, const StimulusSpans& s, int n_tokens) {
  for (const auto* list : {&s.complement, &s.msv, &s.complement_context, &s.msv_context})
    for (const Span& sp : *list)
      if (sp.q >= n_tokens)
        throw ValidationError("span [" + std::to_string(sp.p) + "," + std::to_string(sp.q) + "] of '" + stim +
                              "' out of range for " + std::to_string(n_tokens) + " tokens");
}

inline SpanAnnotationSet parse_span_annotations(const json& j, const RepresentationBundle* bundle = nullptr) {
  if (!j.is_object()) throw ValidationError("span annotations must be an object");
  SpanAnnotationSet out;
  for (auto& [stim, spec] : j.items()) {
    if (!spec.is_object()) throw ValidationError("spans for '" + stim + "' must be an object");
    StimulusSpans s;
    auto read = [&](const char* key, std::vector<Span>& dst) {
      if (!spec.contains(key)) return;
      for (const auto& pair : spec[key]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number_integer())
          throw ValidationError("span of '" + stim + "' must be an integer pair");
        Span sp{pair[0].get<int>(), pair[1].get<int>()};
        if (sp.p < 0) throw ValidationError("span of '" + stim + "' starts before token 0");
        if (sp.q < sp.p)
          throw ValidationError("inverted span [" + std::to_string(sp.p) + "," + std::to_string(sp.q) + "] of '" + stim + "'");
        dst.push_back(sp);
      }
    };
    for (auto& [k, v] : spec.items()) {
      (void)v;
      if (k != "complement" && k != "msv" && k != "complement_context" && k != "msv_context")
        throw ValidationError("unknown span list '" + k + "' for '" + stim + "'");
    }
    read("complement", s.complement);
    read("msv", s.msv);
    read("complement_context", s.complement_context);
    read("msv_context", s.msv_context);
    if (bundle) {
      const auto& it = bundle->item(stim);
      if (it.kind != ItemKind::stimulus) throw ValidationError("'" + stim + "' is not a stimulus");
      check_spans(stim, s, it.n_tokens);
    }
    out.emplace(stim, std::move(s));
  }
  return out;
}

inline SpanAnnotationSet load_span_annotations(const std::filesystem::path& path,
                                               const RepresentationBundle* bundle = nullptr) {
  return parse_span_annotations(detail::read_json_file(path), bundle);
}

/// One analysed sample. Invalid rows carry NaN metrics and a failure tag.
struct ResultRow {
  SpanKind linguistic_span = SpanKind::Entire;
  std::string model_name;
  std::string transformer_layer;
  Task task = Task::Hinting;
  std::string sheet;
  std::string stimulus_id;
  int score = 0;
  int limited_tokens = 0;
  int actual_tokens = 0;
  PermutationKind permutation_control = PermutationKind::Temporal;
  int seed = 42;
  double phi_max_3 = 0.0;
  double phi_4 = 0.0;
  std::vector<double> ci_3 = std::vector<double>(16, 0.0);
  std::vector<double> phi_structure_4 = std::vector<double>(16, 0.0);
  std::vector<double> span_rep = std::vector<double>(16, 0.0);
  double markov_p = 0.0;
  double ci_distance_d = 0.0;
  bool valid = true;
  std::string failure;

  /// Fields identifying the combination this row belongs to.
  auto key() const {
    return std::make_tuple(std::string(to_string(linguistic_span)), model_name, transformer_layer,
                           std::string(to_string(task)), sheet, stimulus_id, score,
                           std::string(to_string(permutation_control)), seed);
  }
  std::string key_string() const {
    std::ostringstream os;
    os << to_string(linguistic_span) << '|' << model_name << '|' << transformer_layer << '|' << to_string(task) << '|'
       << sheet << '|' << stimulus_id << '|' << score << '|' << to_string(permutation_control) << '|' << seed;
    return os.str();
  }
};

inline bool same_real(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

inline bool operator==(const ResultRow& a, const ResultRow& b) {
  auto vec_eq = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!same_real(x[i], y[i])) return false;
    return true;
  };
  return a.key() == b.key() && a.limited_tokens == b.limited_tokens && a.actual_tokens == b.actual_tokens &&
         same_real(a.phi_max_3, b.phi_max_3) && same_real(a.phi_4, b.phi_4) && vec_eq(a.ci_3, b.ci_3) &&
         vec_eq(a.phi_structure_4, b.phi_structure_4) && vec_eq(a.span_rep, b.span_rep) &&
         same_real(a.markov_p, b.markov_p) && same_real(a.ci_distance_d, b.ci_distance_d) && a.valid == b.valid &&
         a.failure == b.failure;
}

inline const std::vector<std::string>& failure_kinds() {
  static const std::vector<std::string> k{"degenerate_node", "markov_fail", "ci_fail", "iit4_init_fail",
                                          "too_few_samples"};
  return k;
}

inline void validate_row(const ResultRow& r) {
  for (const auto* v : {&r.ci_3, &r.phi_structure_4, &r.span_rep})
    if (v->size() != 16) throw SchemaError("result vectors must have 16 components, got " + std::to_string(v->size()));
  if (r.seed < 42 || r.seed > 51) throw SchemaError("seed " + std::to_string(r.seed) + " outside [42, 51]");
  if (r.valid) {
    if (r.limited_tokens < 50 || r.limited_tokens > 1000 || r.limited_tokens % 50 != 0)
      throw SchemaError("limited_tokens must be one of 50, 100, ..., 1000");
    if (!r.failure.empty()) throw SchemaError("valid rows carry no failure tag");
  } else {
    if (std::find(failure_kinds().begin(), failure_kinds().end(), r.failure) == failure_kinds().end())
      throw SchemaError("unknown failure tag '" + r.failure + "'");
    if (r.limited_tokens != 0 && (r.limited_tokens < 50 || r.limited_tokens > 1000 || r.limited_tokens % 50 != 0))
      throw SchemaError("limited_tokens must be 0 or one of 50, 100, ..., 1000");
  }
  if (r.score < 0 || r.score >= score_levels(r.task)) throw SchemaError("score invalid for task");
}

namespace detail {

inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw SchemaError("bad real '" + s + "'");
  }
  if (pos != s.size()) throw SchemaError("bad real '" + s + "'");
  return v;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + '"';
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline json real_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
inline double json_real(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline std::vector<std::string> result_columns() {
  std::vector<std::string> c{"linguistic_span", "model_name", "transformer_layer", "task",
                             "sheet", "stimulus_id", "score", "limited_tokens",
                             "actual_tokens", "permutation_control", "seed", "phi_max_3",
                             "phi_4"};
  for (const char* v : {"ci_3", "phi_structure_4", "span_rep"})
    for (int i = 0; i < 16; ++i) c.push_back(std::string(v) + "_" + std::to_string(i));
  for (const char* v : {"markov_p", "ci_distance_d", "valid", "failure"}) c.push_back(v);
  return c;
}

inline json row_to_json(const ResultRow& r) {
  json j;
  j["linguistic_span"] = to_string(r.linguistic_span);
  j["model_name"] = r.model_name;
  j["transformer_layer"] = r.transformer_layer;
  j["task"] = to_string(r.task);
  j["sheet"] = r.sheet;
  j["stimulus_id"] = r.stimulus_id;
  j["score"] = r.score;
  j["limited_tokens"] = r.limited_tokens;
  j["actual_tokens"] = r.actual_tokens;
  j["permutation_control"] = to_string(r.permutation_control);
  j["seed"] = r.seed;
  j["phi_max_3"] = detail::real_json(r.phi_max_3);
  j["phi_4"] = detail::real_json(r.phi_4);
  for (auto [name, vec] : {std::pair{"ci_3", &r.ci_3}, std::pair{"phi_structure_4", &r.phi_structure_4},
                           std::pair{"span_rep", &r.span_rep}}) {
    json a = json::array();
    for (double v : *vec) a.push_back(detail::real_json(v));
    j[name] = a;
  }
  j["markov_p"] = detail::real_json(r.markov_p);
  j["ci_distance_d"] = detail::real_json(r.ci_distance_d);
  j["valid"] = r.valid;
  j["failure"] = r.failure;
  return j;
}

inline ResultRow row_from_json(const json& j) {
  ResultRow r;
  try {
    r.linguistic_span = parse_span_kind(j.at("linguistic_span").get<std::string>());
    r.model_name = j.at("model_name").get<std::string>();
    r.transformer_layer = j.at("transformer_layer").get<std::string>();
    r.task = parse_task(j.at("task").get<std::string>());
    r.sheet = j.at("sheet").get<std::string>();
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.score = j.at("score").get<int>();
    r.limited_tokens = j.at("limited_tokens").get<int>();
    r.actual_tokens = j.at("actual_tokens").get<int>();
    r.permutation_control = parse_permutation(j.at("permutation_control").get<std::string>());
    r.seed = j.at("seed").get<int>();
    r.phi_max_3 = detail::json_real(j.at("phi_max_3"));
    r.phi_4 = detail::json_real(j.at("phi_4"));
    for (auto [name, vec] : {std::pair{"ci_3", &r.ci_3}, std::pair{"phi_structure_4", &r.phi_structure_4},
                             std::pair{"span_rep", &r.span_rep}}) {
      vec->clear();
      for (const auto& v : j.at(name)) vec->push_back(detail::json_real(v));
    }
    r.markov_p = detail::json_real(j.at("markov_p"));
    r.ci_distance_d = detail::json_real(j.at("ci_distance_d"));
    r.valid = j.at("valid").get<bool>();
    r.failure = j.value("failure", std::string());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("result record: ") + e.what());
  }
  validate_row(r);
  return r;
}

inline std::vector<std::string> row_to_csv(const ResultRow& r) {
  using detail::fmt_real;
  std::vector<std::string> c{to_string(r.linguistic_span), r.model_name, r.transformer_layer, to_string(r.task),
                             r.sheet, r.stimulus_id, std::to_string(r.score), std::to_string(r.limited_tokens),
                             std::to_string(r.actual_tokens), to_string(r.permutation_control),
                             std::to_string(r.seed), fmt_real(r.phi_max_3), fmt_real(r.phi_4)};
  for (const auto* v : {&r.ci_3, &r.phi_structure_4, &r.span_rep})
    for (double x : *v) c.push_back(fmt_real(x));
  c.push_back(fmt_real(r.markov_p));
  c.push_back(fmt_real(r.ci_distance_d));
  c.push_back(r.valid ? "true" : "false");
  c.push_back(r.failure);
  return c;
}

inline ResultRow row_from_csv(const std::vector<std::string>& c) {
  if (c.size() != result_columns().size()) throw SchemaError("result table row has the wrong number of columns");
  using detail::parse_real;
  auto parse_int = [](const std::string& s) {
    std::size_t pos = 0;
    int v;
    try {
      v = std::stoi(s, &pos);
    } catch (const std::exception&) {
      throw SchemaError("bad integer '" + s + "'");
    }
    if (pos != s.size()) throw SchemaError("bad integer '" + s + "'");
    return v;
  };
  ResultRow r;
  std::size_t k = 0;
  r.linguistic_span = parse_span_kind(c[k++]);
  r.model_name = c[k++];
  r.transformer_layer = c[k++];
  r.task = parse_task(c[k++]);
  r.sheet = c[k++];
  r.stimulus_id = c[k++];
  r.score = parse_int(c[k++]);
  r.limited_tokens = parse_int(c[k++]);
  r.actual_tokens = parse_int(c[k++]);
  r.permutation_control = parse_permutation(c[k++]);
  r.seed = parse_int(c[k++]);
  r.phi_max_3 = parse_real(c[k++]);
  r.phi_4 = parse_real(c[k++]);
  for (auto* v : {&r.ci_3, &r.phi_structure_4, &r.span_rep})
    for (auto& x : *v) x = parse_real(c[k++]);
  r.markov_p = parse_real(c[k++]);
  r.ci_distance_d = parse_real(c[k++]);
  if (c[k] != "true" && c[k] != "false") throw SchemaError("bad boolean '" + c[k] + "'");
  r.valid = c[k++] == "true";
  r.failure = c[k++];
  validate_row(r);
  return r;
}

/// Writes `<prefix>.csv` and `<prefix>.jsonl`.
inline void write_result_rows(const std::vector<ResultRow>& rows, const std::filesystem::path& prefix) {
  if (rows.empty()) throw ValidationError("no result rows to write");
  for (const auto& r : rows) validate_row(r);
  auto csv_path = prefix;
  csv_path += ".csv";
  auto jsonl_path = prefix;
  jsonl_path += ".jsonl";
  std::ofstream csv(csv_path, std::ios::binary), jl(jsonl_path, std::ios::binary);
  if (!csv || !jl) throw IoError("cannot write results at " + prefix.string());
  const auto cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << '\n';
  for (const auto& r : rows) {
    const auto cells = row_to_csv(r);
    for (std::size_t i = 0; i < cells.size(); ++i) csv << (i ? "," : "") << detail::csv_quote(cells[i]);
    csv << '\n';
    jl << row_to_json(r).dump() << '\n';
  }
  if (!csv || !jl) throw IoError("failed writing results at " + prefix.string());
}

/// Reads a result file written by write_result_rows; the format follows the extension.
inline std::vector<ResultRow> read_result_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ResultRow> rows;
  std::string line;
  if (path.extension() == ".csv") {
    if (!std::getline(in, line)) throw SchemaError("empty result table");
    const auto header = detail::csv_split(line);
    if (header != result_columns()) throw SchemaError("unexpected result table header");
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(row_from_csv(detail::csv_split(line)));
  } else {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw SchemaError(std::string("result record: ") + e.what());
      }
      rows.push_back(row_from_json(j));
    }
  }
  return rows;
}

}  // namespace rnphi
