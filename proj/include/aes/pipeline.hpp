#pragma once

// Batch pipeline stages: featurize -> train -> predict -> evaluate ->
// report. Stages communicate through files in the configured output
// directory and are byte-deterministic for a fixed (inputs, config, seed).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "aes/corpus.hpp"
#include "aes/embeddings.hpp"
#include "aes/error.hpp"
#include "aes/eval.hpp"
#include "aes/features.hpp"
#include "aes/models.hpp"
#include "aes/textseg.hpp"

namespace aes {

namespace fs = std::filesystem;

struct ModelSettings {
  ModelKind kind = ModelKind::gbt;
  // linear
  double ridge = 1e-8;
  // svr
  double epsilon = 0.1;
  double c = 1.0;
  int epochs = 200;
  // random forest
  int n_trees = 100;
  int rf_max_depth = 8;
  double feature_subsample = 1.0 / 3.0;
  // gbt
  int n_rounds = 200;
  double learning_rate = 0.1;
  int gbt_max_depth = 3;

  nlohmann::ordered_json describe() const {
    switch (kind) {
      case ModelKind::linear:
        return {{"ridge", ridge}};
      case ModelKind::svr:
        return {{"epsilon", epsilon}, {"c", c}, {"epochs", epochs}};
      case ModelKind::random_forest:
        return {{"n_trees", n_trees},
                {"max_depth", rf_max_depth},
                {"feature_subsample", feature_subsample}};
      case ModelKind::gbt:
        return {{"n_rounds", n_rounds},
                {"learning_rate", learning_rate},
                {"max_depth", gbt_max_depth}};
    }
    return {};
  }
};

struct RunConfig {
  fs::path corpus;
  fs::path prompts;
  fs::path stopwords;
  std::optional<fs::path> vectors;
  std::optional<fs::path> sentence_embeddings;
  std::optional<fs::path> lexicon;
  std::uint64_t seed = 0;
  ModelSettings model;
  int oov_freq_threshold = 5;
  int psw_threshold = 3;
  bool include_juk = false;
  bool dump_sentences = false;
  fs::path output_dir;

  static RunConfig load(const fs::path& config_path);
};

namespace detail {

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot read file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view contents) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("short write: " + path.string());
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x00000100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view field, std::size_t line_no) {
  return parse_double_field(field, line_no);
}

inline std::string sanitize_for_filename(std::string_view id) {
  std::string out;
  for (char ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '-' || ch == '_';
    out.push_back(ok ? ch : '_');
  }
  return out;
}

}  // namespace detail

inline fs::path model_path_for(const RunConfig& config,
                               const std::string& prompt_id) {
  return config.output_dir /
         ("model_" + detail::sanitize_for_filename(prompt_id) + ".json");
}

inline fs::path features_path_for(const RunConfig& config) {
  return config.output_dir / "features.tsv";
}

inline fs::path split_path_for(const RunConfig& config) {
  return config.output_dir / "split.json";
}

inline fs::path report_path_for(const RunConfig& config) {
  return config.output_dir / "report.json";
}

inline RunConfig RunConfig::load(const fs::path& config_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config: invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1) {
    throw ValidationError("config: unsupported schema_version");
  }

  const fs::path base = config_path.parent_path();
  auto resolve = [&](const std::string& rel) {
    fs::path p(rel);
    return p.is_absolute() ? p : base / p;
  };
  auto required_path = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ValidationError(std::string("config: missing '") + key + "'");
    }
    return resolve(j[key].get<std::string>());
  };
  auto optional_path = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return resolve(j[key].get<std::string>());
  };

  RunConfig cfg;
  cfg.corpus = required_path("corpus");
  cfg.prompts = required_path("prompts");
  cfg.stopwords = required_path("stopwords");
  cfg.vectors = optional_path("vectors");
  cfg.sentence_embeddings = optional_path("sentence_embeddings");
  cfg.lexicon = optional_path("lexicon");
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.oov_freq_threshold = j.value("oov_freq_threshold", 5);
  cfg.psw_threshold = j.value("psw_threshold", 3);
  cfg.include_juk = j.value("include_juk", false);
  cfg.dump_sentences = j.value("dump_sentences", false);
  if (!j.contains("output_dir") || !j["output_dir"].is_string()) {
    throw ValidationError("config: missing 'output_dir'");
  }
  cfg.output_dir = resolve(j["output_dir"].get<std::string>());

  if (j.contains("model")) {
    const auto& m = j["model"];
    if (!m.is_object() || !m.contains("kind")) {
      throw ValidationError("config: model must be an object with 'kind'");
    }
    cfg.model.kind = model_kind_from_string(m["kind"].get<std::string>());
    for (auto it = m.begin(); it != m.end(); ++it) {
      const std::string& key = it.key();
      if (key == "kind") continue;
      bool known = false;
      switch (cfg.model.kind) {
        case ModelKind::linear:
          if (key == "ridge") {
            cfg.model.ridge = it.value().get<double>();
            known = true;
          }
          break;
        case ModelKind::svr:
          if (key == "epsilon") {
            cfg.model.epsilon = it.value().get<double>();
            known = true;
          } else if (key == "c") {
            cfg.model.c = it.value().get<double>();
            known = true;
          } else if (key == "epochs") {
            cfg.model.epochs = it.value().get<int>();
            known = true;
          }
          break;
        case ModelKind::random_forest:
          if (key == "n_trees") {
            cfg.model.n_trees = it.value().get<int>();
            known = true;
          } else if (key == "max_depth") {
            cfg.model.rf_max_depth = it.value().get<int>();
            known = true;
          } else if (key == "feature_subsample") {
            cfg.model.feature_subsample = it.value().get<double>();
            known = true;
          }
          break;
        case ModelKind::gbt:
          if (key == "n_rounds") {
            cfg.model.n_rounds = it.value().get<int>();
            known = true;
          } else if (key == "learning_rate") {
            cfg.model.learning_rate = it.value().get<double>();
            known = true;
          } else if (key == "max_depth") {
            cfg.model.gbt_max_depth = it.value().get<int>();
            known = true;
          }
          break;
      }
      if (!known) {
        throw ValidationError("config: unknown model option '" + key +
                              "' for kind '" + to_string(cfg.model.kind) +
                              "'");
      }
    }
  }

  // fail fast: every referenced input must exist before any work starts
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) {
      throw ValidationError(std::string("config: ") + what +
                            " does not exist: " + p.string());
    }
  };
  must_exist(cfg.corpus, "corpus");
  must_exist(cfg.prompts, "prompt table");
  must_exist(cfg.stopwords, "stopword list");
  if (cfg.vectors) must_exist(*cfg.vectors, "vector file");
  if (cfg.sentence_embeddings) {
    must_exist(*cfg.sentence_embeddings, "sentence embedding file");
  }
  if (cfg.lexicon) must_exist(*cfg.lexicon, "lexicon");
  return cfg;
}

namespace detail {

struct LoadedInputs {
  std::vector<PromptSpec> prompts;
  std::vector<EssayRecord> essays;
  std::unordered_set<std::string> stopwords;
  std::optional<VectorTable> vectors;
  std::unordered_set<std::string> lexicon;
  // provenance, in emission order
  std::vector<std::pair<std::string, std::string>> input_hashes;
};

inline LoadedInputs load_inputs(const RunConfig& config) {
  LoadedInputs in;
  const std::string corpus_bytes = read_file(config.corpus);
  const std::string prompt_bytes = read_file(config.prompts);
  const std::string stop_bytes = read_file(config.stopwords);
  in.prompts = parse_prompt_table(prompt_bytes);
  in.essays = parse_corpus(corpus_bytes, in.prompts);
  in.stopwords = parse_stopword_list(stop_bytes);
  in.input_hashes.emplace_back("corpus", hex64(fnv1a64(corpus_bytes)));
  in.input_hashes.emplace_back("prompts", hex64(fnv1a64(prompt_bytes)));
  in.input_hashes.emplace_back("stopwords", hex64(fnv1a64(stop_bytes)));
  if (config.vectors) {
    const std::string bytes = read_file(*config.vectors);
    in.vectors = load_vectors(bytes);
    in.input_hashes.emplace_back("vectors", hex64(fnv1a64(bytes)));
  }
  if (config.lexicon) {
    const std::string bytes = read_file(*config.lexicon);
    in.lexicon = parse_stopword_list(bytes);
    in.input_hashes.emplace_back("lexicon", hex64(fnv1a64(bytes)));
  } else if (in.vectors) {
    for (const auto& [token, _] : in.vectors->entries) {
      in.lexicon.insert(token);
    }
  }
  return in;
}

// Essays grouped per prompt in corpus order; prompts kept in table order.
struct PromptGroup {
  const PromptSpec* prompt = nullptr;
  std::vector<std::size_t> essay_indices;
};

inline std::vector<PromptGroup> group_by_prompt(
    const std::vector<PromptSpec>& prompts,
    const std::vector<EssayRecord>& essays) {
  std::vector<PromptGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : prompts) {
    index.emplace(p.prompt_id, groups.size());
    groups.push_back(PromptGroup{&p, {}});
  }
  for (std::size_t i = 0; i < essays.size(); ++i) {
    groups[index.at(essays[i].prompt_id)].essay_indices.push_back(i);
  }
  std::erase_if(groups,
                [](const PromptGroup& g) { return g.essay_indices.empty(); });
  return groups;
}

// One 60/20/20 split per prompt, merged into a single assignment, so every
// prompt's sets keep the paper's proportions.
inline SplitAssignment split_per_prompt(
    const std::vector<PromptGroup>& groups,
    const std::vector<EssayRecord>& essays, std::uint64_t seed) {
  SplitAssignment merged;
  merged.seed = seed;
  for (const auto& g : groups) {
    std::vector<EssayRecord> subset;
    subset.reserve(g.essay_indices.size());
    for (std::size_t i : g.essay_indices) subset.push_back(essays[i]);
    SplitAssignment s;
    try {
      s = split_corpus(subset, seed);
    } catch (const ValidationError&) {
      throw ValidationError("prompt '" + g.prompt->prompt_id +
                            "' has fewer than 5 essays; cannot split");
    }
    merged.train_ids.insert(merged.train_ids.end(), s.train_ids.begin(),
                            s.train_ids.end());
    merged.validation_ids.insert(merged.validation_ids.end(),
                                 s.validation_ids.begin(),
                                 s.validation_ids.end());
    merged.test_ids.insert(merged.test_ids.end(), s.test_ids.begin(),
                           s.test_ids.end());
  }
  return merged;
}

}  // namespace detail

struct FeaturizeResult {
  fs::path features_path;
  fs::path split_path;
  std::size_t n_essays = 0;
};

inline FeaturizeResult cmd_featurize(const RunConfig& config) {
  auto in = detail::load_inputs(config);
  auto groups = detail::group_by_prompt(in.prompts, in.essays);
  if (groups.empty()) throw ValidationError("corpus has no essays");
  SplitAssignment split = detail::split_per_prompt(groups, in.essays,
                                                   config.seed);

  std::vector<SegmentedText> segmented;
  segmented.reserve(in.essays.size());
  for (const auto& e : in.essays) {
    segmented.push_back(segment_essay(e.text, in.stopwords));
  }

  // sentence embeddings per essay
  std::vector<std::vector<std::vector<double>>> embeddings(in.essays.size());
  if (config.sentence_embeddings) {
    const std::string bytes = detail::read_file(*config.sentence_embeddings);
    auto rows = load_sentence_embeddings(bytes);
    std::size_t total = 0;
    for (const auto& seg : segmented) {
      total += static_cast<std::size_t>(seg.sentence_count());
    }
    if (rows.size() != total) {
      throw ValidationError(
          "sentence embeddings: expected " + std::to_string(total) +
          " rows (one per segmented sentence), got " +
          std::to_string(rows.size()));
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < segmented.size(); ++i) {
      const auto count =
          static_cast<std::size_t>(segmented[i].sentence_count());
      embeddings[i].assign(rows.begin() + static_cast<long>(cursor),
                           rows.begin() + static_cast<long>(cursor + count));
      cursor += count;
    }
  } else if (in.vectors) {
    for (std::size_t i = 0; i < segmented.size(); ++i) {
      for (const auto& sentence : segmented[i].sentences) {
        std::vector<std::string> tokens;
        tokens.reserve(sentence.size());
        for (const auto& w : sentence) tokens.push_back(w.text);
        embeddings[i].push_back(sentence_embedding(tokens, *in.vectors));
      }
    }
  } else {
    // no embedding source: zero-dimensional vectors, coherence 0
    for (std::size_t i = 0; i < segmented.size(); ++i) {
      embeddings[i].assign(
          static_cast<std::size_t>(segmented[i].sentence_count()), {});
    }
  }

  // document frequency over the training split only
  std::unordered_set<std::string> train_set(split.train_ids.begin(),
                                            split.train_ids.end());
  std::unordered_map<std::string, int> doc_freq;
  for (std::size_t i = 0; i < in.essays.size(); ++i) {
    if (train_set.count(in.essays[i].essay_id) == 0) continue;
    std::unordered_set<std::string> distinct;
    for (const auto& sentence : segmented[i].sentences) {
      for (const auto& w : sentence) distinct.insert(w.text);
    }
    for (const auto& tok : distinct) doc_freq[tok]++;
  }

  std::ostringstream out;
  out << "# aes featurize format_version=1\n";
  out << "# seed=" << config.seed << "\n";
  for (const auto& [name, hash] : in.input_hashes) {
    out << "# " << name << "=fnv1a64:" << hash << "\n";
  }
  out << "essay_id";
  for (const auto& name : feature_names()) out << '\t' << name;
  out << '\n';
  for (std::size_t i = 0; i < in.essays.size(); ++i) {
    FeatureVector fv = extract_features(
        segmented[i], in.lexicon, doc_freq, config.oov_freq_threshold,
        config.psw_threshold, embeddings[i]);
    out << in.essays[i].essay_id << '\t' << fv.essay_length << '\t'
        << detail::format_double(fv.avg_sentence_length) << '\t'
        << detail::format_double(fv.avg_word_length) << '\t'
        << detail::format_double(fv.readability) << '\t' << fv.vocab_size
        << '\t' << fv.oov_count << '\t'
        << detail::format_double(fv.coherence) << '\t' << fv.juk_count
        << '\n';
  }

  FeaturizeResult result;
  result.features_path = features_path_for(config);
  result.split_path = split_path_for(config);
  result.n_essays = in.essays.size();
  detail::write_file(result.features_path, out.str());
  detail::write_file(result.split_path, split_to_json(split).dump(2) + "\n");

  if (config.dump_sentences) {
    std::ostringstream sent;
    sent << "# aes sentences format_version=1\n";
    sent << "index\tessay_id\tsentence\n";
    std::size_t index = 0;
    for (std::size_t i = 0; i < in.essays.size(); ++i) {
      for (const auto& sentence : segmented[i].sentences) {
        sent << index++ << '\t' << in.essays[i].essay_id << '\t';
        for (std::size_t w = 0; w < sentence.size(); ++w) {
          if (w > 0) sent << ' ';
          sent << sentence[w].text;
        }
        sent << '\n';
      }
    }
    detail::write_file(config.output_dir / "sentences.tsv", sent.str());
  }
  return result;
}

namespace detail {

inline std::unordered_map<std::string, FeatureVector> read_features_file(
    const fs::path& path) {
  if (!fs::exists(path)) {
    throw ValidationError("features file not found (run featurize first): " +
                          path.string());
  }
  const std::string bytes = read_file(path);
  auto lines = split_lines(bytes);
  std::unordered_map<std::string, FeatureVector> out;
  bool header_seen = false;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li][0] == '#') continue;
    const std::size_t line_no = li + 1;
    auto fields = split_fields(lines[li]);
    if (!header_seen) {
      if (fields.size() != feature_names().size() + 1 ||
          fields[0] != "essay_id") {
        throw ParseError("features file: unexpected header");
      }
      for (std::size_t k = 0; k < feature_names().size(); ++k) {
        if (fields[k + 1] != feature_names()[k]) {
          throw ParseError("features file: unexpected column '" +
                           std::string(fields[k + 1]) + "'");
        }
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != feature_names().size() + 1) {
      throw ParseError("features file line " + std::to_string(line_no) +
                       ": wrong field count");
    }
    FeatureVector fv;
    fv.essay_length = parse_int_field(fields[1], line_no, "essay_length");
    fv.avg_sentence_length = parse_double(fields[2], line_no);
    fv.avg_word_length = parse_double(fields[3], line_no);
    fv.readability = parse_double(fields[4], line_no);
    fv.vocab_size = parse_int_field(fields[5], line_no, "vocab_size");
    fv.oov_count = parse_int_field(fields[6], line_no, "oov_count");
    fv.coherence = parse_double(fields[7], line_no);
    fv.juk_count = parse_int_field(fields[8], line_no, "juk_count");
    if (!out.emplace(std::string(fields[0]), fv).second) {
      throw ValidationError("features file line " + std::to_string(line_no) +
                            ": duplicate essay_id");
    }
  }
  if (!header_seen) throw ParseError("features file: missing header");
  return out;
}

inline SplitAssignment read_split_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ValidationError("split file not found (run featurize first): " +
                          path.string());
  }
  try {
    return split_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("split file: " + std::string(e.what()));
  }
}

struct PromptData {
  const PromptSpec* prompt = nullptr;
  std::vector<const EssayRecord*> essays;  // corpus order
  std::vector<FeatureVector> features;
};

// Joins a subset of essay ids (in corpus order) with their features.
inline PromptData collect_prompt_data(
    const PromptGroup& group, const std::vector<EssayRecord>& essays,
    const std::unordered_map<std::string, FeatureVector>& features,
    const std::unordered_set<std::string>& id_filter) {
  PromptData data;
  data.prompt = group.prompt;
  for (std::size_t i : group.essay_indices) {
    const EssayRecord& rec = essays[i];
    if (id_filter.count(rec.essay_id) == 0) continue;
    auto it = features.find(rec.essay_id);
    if (it == features.end()) {
      throw ValidationError("essay '" + rec.essay_id +
                            "' missing from features file; rerun featurize");
    }
    data.essays.push_back(&rec);
    data.features.push_back(it->second);
  }
  return data;
}

inline double normalized_gold(const EssayRecord& rec,
                              const PromptSpec& prompt) {
  if (!rec.gold_score) {
    throw ValidationError("essay '" + rec.essay_id + "' has no gold score");
  }
  return normalize_score(*rec.gold_score, prompt);
}

inline double qwk_of_predictions(const TrainedModel& model,
                                 const PromptData& data) {
  std::vector<int> gold, predicted;
  for (std::size_t i = 0; i < data.essays.size(); ++i) {
    gold.push_back(*data.essays[i]->gold_score);
    predicted.push_back(
        rescale_score(predict(model, data.features[i]), *data.prompt));
  }
  return quadratic_weighted_kappa(gold, predicted, *data.prompt);
}

}  // namespace detail

struct PromptTrainSummary {
  std::string prompt_id;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  double train_qwk = 0.0;
  double validation_qwk = 0.0;
  fs::path model_path;
};

struct TrainResult {
  std::vector<PromptTrainSummary> prompts;
  fs::path log_path;
};

inline TrainResult cmd_train(const RunConfig& config,
                             const std::optional<std::string>& prompt_filter =
                                 std::nullopt) {
  auto in = detail::load_inputs(config);
  auto groups = detail::group_by_prompt(in.prompts, in.essays);
  auto features = detail::read_features_file(features_path_for(config));
  SplitAssignment split = detail::read_split_file(split_path_for(config));

  std::unordered_set<std::string> train_set(split.train_ids.begin(),
                                            split.train_ids.end());
  std::unordered_set<std::string> validation_set(
      split.validation_ids.begin(), split.validation_ids.end());

  std::ostringstream log;
  log << "# aes train format_version=1\n";
  log << "seed: " << config.seed << "\n";
  log << "model: " << to_string(config.model.kind) << "\n";
  log << "hyperparameters: " << config.model.describe().dump() << "\n";

  TrainResult result;
  bool matched = false;
  for (const auto& group : groups) {
    const PromptSpec& prompt = *group.prompt;
    if (prompt_filter && prompt.prompt_id != *prompt_filter) continue;
    matched = true;
    if (group.essay_indices.size() < 5) {
      throw ValidationError("prompt '" + prompt.prompt_id +
                            "' has fewer than 5 essays");
    }
    auto train_data = detail::collect_prompt_data(group, in.essays, features,
                                                  train_set);
    auto validation_data = detail::collect_prompt_data(
        group, in.essays, features, validation_set);
    if (train_data.essays.empty()) {
      throw ValidationError("prompt '" + prompt.prompt_id +
                            "' has no training essays in the split");
    }

    Matrix x_raw;
    std::vector<double> y;
    for (std::size_t i = 0; i < train_data.essays.size(); ++i) {
      x_raw.push_back(
          feature_row(train_data.features[i], config.include_juk));
      y.push_back(detail::normalized_gold(*train_data.essays[i], prompt));
    }
    FeatureScaler scaler = FeatureScaler::fit(x_raw);
    Matrix x_scaled;
    x_scaled.reserve(x_raw.size());
    for (const auto& row : x_raw) x_scaled.push_back(scaler.apply(row));

    TrainedModel model;
    const ModelSettings& ms = config.model;
    switch (ms.kind) {
      case ModelKind::linear:
        model = fit_linear(x_scaled, y, ms.ridge);
        break;
      case ModelKind::svr:
        model = fit_svr(x_scaled, y, ms.epsilon, ms.c, ms.epochs, config.seed);
        break;
      case ModelKind::random_forest:
        model = fit_random_forest(x_scaled, y, ms.n_trees, ms.rf_max_depth,
                                  ms.feature_subsample, config.seed);
        break;
      case ModelKind::gbt:
        model = fit_gbt(x_scaled, y, ms.n_rounds, ms.learning_rate,
                        ms.gbt_max_depth, config.seed);
        break;
    }
    model.scaler = scaler;
    model.prompt = prompt;
    model.train_seed = config.seed;
    model.includes_juk = config.include_juk;

    PromptTrainSummary summary;
    summary.prompt_id = prompt.prompt_id;
    summary.n_train = train_data.essays.size();
    summary.n_validation = validation_data.essays.size();
    summary.train_qwk = detail::qwk_of_predictions(model, train_data);
    summary.validation_qwk =
        validation_data.essays.empty()
            ? 0.0
            : detail::qwk_of_predictions(model, validation_data);
    summary.model_path = model_path_for(config, prompt.prompt_id);
    detail::write_file(summary.model_path, model_to_json(model));

    log << "prompt " << prompt.prompt_id << ": n_train=" << summary.n_train
        << " n_validation=" << summary.n_validation
        << " train_qwk=" << detail::format_double(summary.train_qwk)
        << " validation_qwk="
        << detail::format_double(summary.validation_qwk) << "\n";
    result.prompts.push_back(std::move(summary));
  }
  if (prompt_filter && !matched) {
    throw ValidationError("prompt '" + *prompt_filter +
                          "' not present in the corpus");
  }

  result.log_path = config.output_dir / "train_log.txt";
  detail::write_file(result.log_path, log.str());
  return result;
}

namespace detail {

inline TrainedModel load_model_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ValidationError("model file not found: " + path.string());
  }
  return model_from_json(read_file(path));
}

// Picks the model for a prompt: an explicit --model path must match the
// prompt it claims; otherwise the per-prompt file from train is used.
inline TrainedModel model_for_prompt(const RunConfig& config,
                                     const std::optional<fs::path>& override,
                                     const PromptSpec& prompt) {
  const fs::path path =
      override ? *override : model_path_for(config, prompt.prompt_id);
  TrainedModel model = load_model_file(path);
  if (model.prompt.prompt_id != prompt.prompt_id) {
    throw ValidationError("model '" + path.string() + "' was trained for '" +
                          model.prompt.prompt_id + "', not '" +
                          prompt.prompt_id + "'");
  }
  if (model.prompt.score_min != prompt.score_min ||
      model.prompt.score_max != prompt.score_max) {
    throw ValidationError("model '" + path.string() +
                          "' score range disagrees with the prompt table");
  }
  return model;
}

}  // namespace detail

struct PredictResult {
  fs::path predictions_path;
  std::size_t n = 0;
};

inline PredictResult cmd_predict(
    const RunConfig& config,
    const std::optional<fs::path>& model_override = std::nullopt,
    const std::optional<std::string>& prompt_filter = std::nullopt) {
  auto in = detail::load_inputs(config);
  auto groups = detail::group_by_prompt(in.prompts, in.essays);
  auto features = detail::read_features_file(features_path_for(config));

  std::ostringstream out;
  out << "# aes predict format_version=1\n";
  out << "# seed=" << config.seed << "\n";
  out << "essay_id\tprompt_id\tprediction\tscore\n";
  std::size_t n = 0;
  bool matched = false;
  for (const auto& group : groups) {
    const PromptSpec& prompt = *group.prompt;
    if (prompt_filter && prompt.prompt_id != *prompt_filter) continue;
    matched = true;
    TrainedModel model =
        detail::model_for_prompt(config, model_override, prompt);
    for (std::size_t i : group.essay_indices) {
      const EssayRecord& rec = in.essays[i];
      auto it = features.find(rec.essay_id);
      if (it == features.end()) {
        throw ValidationError("essay '" + rec.essay_id +
                              "' missing from features file");
      }
      const double raw = predict(model, it->second);
      out << rec.essay_id << '\t' << prompt.prompt_id << '\t'
          << detail::format_double(raw) << '\t'
          << rescale_score(raw, prompt) << '\n';
      ++n;
    }
  }
  if (prompt_filter && !matched) {
    throw ValidationError("prompt '" + *prompt_filter +
                          "' not present in the corpus");
  }

  PredictResult result;
  result.predictions_path = config.output_dir / "predictions.tsv";
  result.n = n;
  detail::write_file(result.predictions_path, out.str());
  return result;
}

struct EvaluateResult {
  std::vector<PromptEvaluation> prompts;
  double average_qwk = 0.0;
  fs::path report_path;
  std::string table;
};

namespace detail {

inline std::string render_report_table(
    const std::vector<PromptEvaluation>& prompts, double average,
    const std::string& model_kind) {
  std::ostringstream out;
  char line[128];
  out << "model: " << model_kind << "\n";
  std::snprintf(line, sizeof(line), "%-12s %6s %-9s %8s\n", "prompt", "n",
                "range", "qwk");
  out << line;
  for (const auto& p : prompts) {
    const std::string range =
        "[" + std::to_string(p.score_min) + "," +
        std::to_string(p.score_max) + "]";
    std::snprintf(line, sizeof(line), "%-12s %6d %-9s %8.4f\n",
                  p.prompt_id.c_str(), p.n, range.c_str(), p.qwk);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %6s %-9s %8.4f\n", "average", "",
                "", average);
  out << line;
  return out.str();
}

}  // namespace detail

inline EvaluateResult cmd_evaluate(
    const RunConfig& config,
    const std::optional<fs::path>& model_override = std::nullopt,
    const std::optional<std::string>& prompt_filter = std::nullopt) {
  auto in = detail::load_inputs(config);
  auto groups = detail::group_by_prompt(in.prompts, in.essays);
  auto features = detail::read_features_file(features_path_for(config));
  SplitAssignment split = detail::read_split_file(split_path_for(config));
  std::unordered_set<std::string> test_set(split.test_ids.begin(),
                                           split.test_ids.end());

  EvaluateResult result;
  std::string model_kind;
  bool matched = false;
  for (const auto& group : groups) {
    const PromptSpec& prompt = *group.prompt;
    if (prompt_filter && prompt.prompt_id != *prompt_filter) continue;
    matched = true;
    TrainedModel model =
        detail::model_for_prompt(config, model_override, prompt);
    model_kind = to_string(model.kind);
    auto data =
        detail::collect_prompt_data(group, in.essays, features, test_set);
    if (data.essays.empty()) {
      throw ValidationError("prompt '" + prompt.prompt_id +
                            "' has no test essays in the split");
    }
    std::vector<EssayRecord> essays;
    for (const auto* e : data.essays) essays.push_back(*e);
    result.prompts.push_back(evaluate_model(model, essays, data.features));
  }
  if (!matched) {
    throw ValidationError(prompt_filter ? "prompt '" + *prompt_filter +
                                              "' not present in the corpus"
                                        : std::string(
                                              "no prompts to evaluate"));
  }

  double sum = 0.0;
  for (const auto& p : result.prompts) sum += p.qwk;
  result.average_qwk = sum / static_cast<double>(result.prompts.size());

  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["seed"] = config.seed;
  j["model_kind"] = model_kind;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& p : result.prompts) {
    rows.push_back({{"prompt_id", p.prompt_id},
                    {"n", p.n},
                    {"qwk", p.qwk},
                    {"score_min", p.score_min},
                    {"score_max", p.score_max},
                    {"prediction_histogram", p.prediction_histogram},
                    {"gold_histogram", p.gold_histogram}});
  }
  j["prompts"] = std::move(rows);
  j["average_qwk"] = result.average_qwk;

  result.report_path = report_path_for(config);
  detail::write_file(result.report_path, j.dump(2) + "\n");
  result.table = detail::render_report_table(result.prompts,
                                             result.average_qwk, model_kind);
  return result;
}

// Renders the stored evaluation report, plus pairwise inter-rater
// reliability for any prompt whose essays carry rater columns.
inline std::string cmd_report(const RunConfig& config) {
  const fs::path path = report_path_for(config);
  if (!fs::exists(path)) {
    throw ValidationError("report not found (run evaluate first): " +
                          path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report: " + std::string(e.what()));
  }
  std::vector<PromptEvaluation> prompts;
  for (const auto& row : j.at("prompts")) {
    PromptEvaluation p;
    p.prompt_id = row.at("prompt_id").get<std::string>();
    p.n = row.at("n").get<int>();
    p.qwk = row.at("qwk").get<double>();
    p.score_min = row.at("score_min").get<int>();
    p.score_max = row.at("score_max").get<int>();
    prompts.push_back(std::move(p));
  }
  std::string out = detail::render_report_table(
      prompts, j.at("average_qwk").get<double>(),
      j.at("model_kind").get<std::string>());

  auto in = detail::load_inputs(config);
  auto groups = detail::group_by_prompt(in.prompts, in.essays);
  for (const auto& group : groups) {
    bool any_raters = false;
    for (std::size_t i : group.essay_indices) {
      if (!in.essays[i].rater_scores.empty()) {
        any_raters = true;
        break;
      }
    }
    if (!any_raters) continue;
    std::vector<EssayRecord> essays;
    for (std::size_t i : group.essay_indices) essays.push_back(in.essays[i]);
    auto pairs = inter_rater_report(essays, *group.prompt);
    out += "\ninter-rater reliability (" + group.prompt->prompt_id + ")\n";
    char line[64];
    for (const auto& p : pairs) {
      std::snprintf(line, sizeof(line), "raters %d-%d: %.4f\n", p.rater_a,
                    p.rater_b, p.kappa);
      out += line;
    }
  }
  return out;
}

}  // namespace aes
