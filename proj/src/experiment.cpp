#include "crowdrel/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "crowdrel/baselines.hpp"
#include "crowdrel/error.hpp"
#include "crowdrel/eval.hpp"
#include "crowdrel/featurize.hpp"
#include "crowdrel/rng.hpp"
#include "crowdrel/simulate.hpp"

namespace crowdrel {

namespace fs = std::filesystem;

namespace {

// key, default ("" = unset)
const std::vector<std::pair<std::string, std::string>>& key_table() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"seed", "0"},
      {"out", ""},
      // simulate
      {"dataset", ""},
      {"n", ""},
      {"noise", ""},
      {"text_labels", "3"},
      {"panel", ""},
      {"keep_prob", "1"},
      // data for train/eval
      {"data", ""},
      {"instances", ""},
      {"annotations", ""},
      {"gold", ""},
      {"format", "dense-csv"},
      {"labels", ""},
      {"featurizer", "auto"},
      {"embeddings", ""},
      // model
      {"classifier_hidden", ""},
      {"estimator_hidden", ""},
      {"estimator_input", "classifier-hidden"},
      {"mode", "ce-jt"},
      {"inner", "50"},
      {"max_outer", ""},
      {"tol", "0.001"},
      {"pretrain", "ds"},
      {"pretrain_epochs", "200"},
      {"pretrain_batch", "32"},
      {"lr", "0.001"},
      {"weight_decay", "0.001"},
      {"clip", "5"},
      // eval
      {"run", ""},
      {"metrics", "f1,mv,ds"},
      {"iaa", "false"},
      {"denoise", ""},
      {"report_k", "0"},
  };
  return table;
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_u64(const ExperimentConfig& c, const std::string& key) {
  const std::string v = c.get(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorKind::argument, key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const ExperimentConfig& c, const std::string& key) {
  const std::string v = c.get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::argument, key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const ExperimentConfig& c, const std::string& key) {
  const std::string v = c.get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
  throw Error(ErrorKind::argument, key + ": expected true/false, got '" + v + "'");
}

std::string csv_quote(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
  std::string out = "\"";
  for (char ch : v) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

fs::path output_dir(const ExperimentConfig& c) {
  fs::path dir = c.has("out") ? c.get("out") : ExperimentConfig::default_output_dir();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

InstanceFormat parse_format(const std::string& s) {
  if (s == "dense-csv" || s == "csv") return InstanceFormat::dense_csv;
  if (s == "text-jsonl" || s == "jsonl") return InstanceFormat::text_jsonl;
  throw Error(ErrorKind::argument, "format: expected dense-csv or text-jsonl, got '" + s + "'");
}

void write_manifest(const fs::path& path, nlohmann::json body) {
  auto out = open_out(path);
  out << body.dump(2) << '\n';
  finish(out, path);
}

std::vector<std::string> numbered_labels(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < n; ++t) names.push_back(std::to_string(t));
  return names;
}

std::vector<AnnotatorProfile> resolve_panel(const std::string& spec, std::size_t n_labels) {
  if (spec == "standard") return standard_panel(n_labels);
  if (spec == "graded") return graded_panel();
  std::vector<AnnotatorProfile> panel;
  for (const auto& name : split_list(spec)) panel.push_back(AnnotatorProfile::parse(name));
  if (panel.empty()) throw Error(ErrorKind::validation, "panel is empty");
  return panel;
}

}  // namespace

// ---- config ----

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, def] : key_table()) k.push_back(key);
    return k;
  }();
  return keys;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = normalize_key(trim(raw_key));
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw Error(ErrorKind::argument, "unknown config key '" + raw_key + "'");
  values_[key] = trim(value);
}

void ExperimentConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::parse,
                  origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.kind(), origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  parse_text(buf.str(), path);
}

bool ExperimentConfig::has(const std::string& key) const {
  const auto it = values_.find(normalize_key(key));
  return it != values_.end() && !it->second.empty();
}

std::string ExperimentConfig::get(const std::string& raw) const {
  const std::string key = normalize_key(raw);
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  for (const auto& [k, def] : key_table())
    if (k == key) return def;
  throw Error(ErrorKind::argument, "unknown config key '" + raw + "'");
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "out" || k == "data" || k == "run") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  // FNV-1a, 64 bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::default_output_dir() {
  if (const char* env = std::getenv("CROWDREL_OUT_DIR"); env && *env) return env;
  return "crowdrel-out";
}

// ---- data ----

DataBundle load_data(const ExperimentConfig& c) {
  DataBundle d;
  std::string instances_path, annotations_path, gold_path;
  std::vector<std::string> label_names = split_list(c.get("labels"));
  d.format = parse_format(c.get("format"));

  const bool explicit_paths = c.has("instances") || c.has("annotations");
  if (!explicit_paths) {
    const fs::path dir = c.has("data") ? fs::path(c.get("data"))
                                       : (c.has("out") ? fs::path(c.get("out"))
                                                       : fs::path(ExperimentConfig::default_output_dir()));
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in)
      throw Error(ErrorKind::io, "no dataset: " + manifest_path.string() +
                                     " missing and no instances/annotations given");
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(in);
      instances_path = (dir / m.at("files").at("instances").get<std::string>()).string();
      annotations_path = (dir / m.at("files").at("annotations").get<std::string>()).string();
      if (m.at("files").contains("gold"))
        gold_path = (dir / m.at("files").at("gold").get<std::string>()).string();
      if (label_names.empty()) label_names = m.at("labels").get<std::vector<std::string>>();
      d.format = parse_format(m.at("instance_format").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, manifest_path.string() + ": " + e.what());
    }
  } else {
    if (!c.has("instances") || !c.has("annotations"))
      throw Error(ErrorKind::validation, "both instances and annotations paths are required");
    instances_path = c.get("instances");
    annotations_path = c.get("annotations");
    gold_path = c.get("gold");
  }
  if (label_names.empty())
    throw Error(ErrorKind::validation, "label set unknown: pass labels");
  d.labels = LabelSet(label_names);

  d.instances = load_instances(instances_path, d.format);
  std::vector<std::string> ids;
  for (const auto& inst : d.instances) ids.push_back(inst.id);
  IdIndex index(ids);
  d.annotations = load_annotations(annotations_path, d.labels, index);
  if (!gold_path.empty()) d.gold = load_gold(gold_path, d.labels, index);

  const auto problems = validate(d.instances, d.annotations, d.labels.size(),
                                 d.gold ? &*d.gold : nullptr);
  if (!problems.empty()) {
    std::string msg = "dataset failed validation:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorKind::validation, msg);
  }
  return d;
}

Features featurize(const DataBundle& data, const ExperimentConfig& c) {
  std::string kind = c.get("featurizer");
  if (data.format == InstanceFormat::dense_csv) {
    if (kind != "auto" && kind != "none")
      throw Error(ErrorKind::validation, "featurizer '" + kind + "' needs text instances");
    return {feature_matrix(data.instances), "none"};
  }
  if (kind == "auto") kind = c.has("embeddings") ? "embedding" : "tfidf";

  std::vector<std::vector<double>> rows(data.instances.size());
  if (kind == "tfidf") {
    std::vector<std::string> corpus;
    for (const auto& inst : data.instances)
      for (const auto& t : inst.text) corpus.push_back(t);
    const Vocabulary vocab = Vocabulary::fit(corpus);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (const auto& t : data.instances[i].text) {
        auto v = vocab.transform(t);
        rows[i].insert(rows[i].end(), v.begin(), v.end());
      }
  } else if (kind == "embedding") {
    if (!c.has("embeddings"))
      throw Error(ErrorKind::validation, "featurizer embedding needs an embeddings file");
    const EmbeddingTable table = EmbeddingTable::load(c.get("embeddings"));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (const auto& t : data.instances[i].text) {
        auto v = table.average(t);
        rows[i].insert(rows[i].end(), v.begin(), v.end());
      }
  } else {
    throw Error(ErrorKind::argument, "featurizer: expected auto, none, tfidf or embedding");
  }

  Features f;
  f.kind = kind;
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  f.x = Matrix(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), f.x.row(i).begin());
  return f;
}

TrainConfig train_config(const ExperimentConfig& c, const std::string& feature_kind) {
  TrainConfig t;
  t.mode = parse_mode(c.get("mode"));
  t.inner_iters = parse_u64(c, "inner");
  if (c.has("max_outer")) t.max_outer = parse_u64(c, "max_outer");
  t.early_stop_tol = parse_real(c, "tol");
  t.pretrain = parse_pretrain_source(c.get("pretrain"));
  t.pretrain_epochs = parse_u64(c, "pretrain_epochs");
  t.pretrain_batch = parse_u64(c, "pretrain_batch");
  t.estimator_input = parse_estimator_input(c.get("estimator_input"));
  t.adam.alpha = parse_real(c, "lr");
  t.adam.weight_decay = parse_real(c, "weight_decay");
  t.adam.clip_norm = parse_real(c, "clip");
  t.seed = parse_u64(c, "seed");

  // widths by input kind: 2-D points, bag of words, averaged embeddings
  std::size_t ch = 5, eh = 5;
  if (feature_kind == "tfidf") ch = eh = 100;
  if (feature_kind == "embedding") ch = 50, eh = 25;
  t.classifier_hidden = c.has("classifier_hidden") ? parse_u64(c, "classifier_hidden") : ch;
  t.estimator_hidden = c.has("estimator_hidden") ? parse_u64(c, "estimator_hidden") : eh;
  try {
    t.check();
  } catch (const Error& e) {
    throw Error(ErrorKind::validation, e.what());
  }
  return t;
}

// ---- simulate ----

DataBundle generate_data(const ExperimentConfig& c, std::vector<std::string>* panel_names) {
  if (!c.has("dataset")) throw Error(ErrorKind::validation, "simulate needs a dataset");
  if (!c.has("panel")) throw Error(ErrorKind::validation, "simulate needs an annotator panel");
  const std::string dataset = c.get("dataset");
  const std::uint64_t seed = parse_u64(c, "seed");
  const bool text = dataset == "text";

  Generated g;
  std::size_t n_labels = 0;
  if (text) {
    n_labels = parse_u64(c, "text_labels");
    const std::size_t n = c.has("n") ? parse_u64(c, "n") : 500;
    g = gen_text(n, n_labels, derive_seed(seed, 11));
  } else {
    const Dataset2d kind = parse_dataset_2d(dataset);
    n_labels = dataset_2d_labels(kind);
    std::optional<double> noise;
    if (c.has("noise")) noise = parse_real(c, "noise");
    const std::size_t n = c.has("n") ? parse_u64(c, "n") : 1000;
    g = gen_2d(kind, n, noise, derive_seed(seed, 11));
  }

  std::vector<AnnotatorProfile> panel;
  try {
    panel = resolve_panel(c.get("panel"), n_labels);
  } catch (const Error& e) {
    throw Error(ErrorKind::validation, std::string("panel: ") + e.what());
  }
  for (const auto& p : panel)
    if (p.kind == ProfileKind::narrow && p.domain >= n_labels)
      throw Error(ErrorKind::validation, "panel: " + p.name() + " has no such class");
  if (panel_names)
    for (const auto& p : panel) panel_names->push_back(p.name());

  DataBundle d;
  d.labels = LabelSet(numbered_labels(n_labels));
  d.format = text ? InstanceFormat::text_jsonl : InstanceFormat::dense_csv;
  d.annotations = simulate_annotations(g.truth, n_labels, panel, derive_seed(seed, 12),
                                       parse_real(c, "keep_prob"));
  for (const auto& inst : g.instances) d.annotations.instance_ids.push_back(inst.id);
  d.gold = to_gold(g.truth);
  d.instances = std::move(g.instances);
  return d;
}

SimulateOutput cmd_simulate(const ExperimentConfig& c, const Logger& log) {
  std::vector<std::string> names;
  const DataBundle d = generate_data(c, &names);
  const std::string dataset = c.get("dataset");
  const bool text = d.format == InstanceFormat::text_jsonl;
  const AnnotationSet& ann = d.annotations;
  const LabelSet& labels = d.labels;

  const fs::path dir = output_dir(c);
  const std::string inst_file = text ? "instances.jsonl" : "instances.csv";
  if (text)
    write_instances_jsonl((dir / inst_file).string(), d.instances);
  else
    write_instances_csv((dir / inst_file).string(), d.instances);
  write_gold_csv((dir / "gold.csv").string(), *d.gold, ann.instance_ids, labels);
  write_annotations_csv((dir / "annotations.csv").string(), ann, labels);

  nlohmann::json m;
  m["format"] = "crowdrel-dataset";
  m["version"] = 1;
  m["config_hash"] = c.hash();
  m["seed"] = parse_u64(c, "seed");
  m["dataset"] = dataset;
  m["n_instances"] = d.instances.size();
  if (!text)
    m["noise"] = c.has("noise") ? parse_real(c, "noise")
                                : default_noise(parse_dataset_2d(dataset));
  m["labels"] = labels.names();
  m["panel"] = names;
  m["keep_prob"] = parse_real(c, "keep_prob");
  m["instance_format"] = text ? "text-jsonl" : "dense-csv";
  m["files"] = {{"instances", inst_file}, {"gold", "gold.csv"}, {"annotations", "annotations.csv"}};
  write_manifest(dir / "manifest.json", m);

  SimulateOutput out;
  out.directory = dir.string();
  out.files = {(dir / inst_file).string(), (dir / "gold.csv").string(),
               (dir / "annotations.csv").string(), (dir / "manifest.json").string()};
  out.n_instances = d.instances.size();
  out.n_annotators = ann.n_annotators();
  out.n_annotations = ann.size();
  if (log)
    log("simulated " + dataset + ": " + std::to_string(out.n_instances) + " instances, " +
        std::to_string(out.n_annotators) + " annotators, " +
        std::to_string(out.n_annotations) + " labels -> " + out.directory);
  return out;
}

// ---- train ----

TrainOutput cmd_train(const ExperimentConfig& c, const Logger& log) {
  const DataBundle data = load_data(c);
  const Features feats = featurize(data, c);
  const TrainConfig cfg = train_config(c, feats.kind);
  const std::size_t T = data.labels.size();
  const GoldLabels* gold = data.gold ? &*data.gold : nullptr;

  if (log)
    log("features: " + feats.kind + " (" + std::to_string(feats.x.cols) + " dims), mode " +
        mode_name(cfg.mode) + ", pretrain " + pretrain_source_name(cfg.pretrain));

  ReliabilityModel model = pretrain(feats.x, data.annotations, T, cfg);
  TrainResult result;
  if (cfg.outer_limit() > 0) result = train(model, feats.x, data.annotations, cfg, gold);

  const fs::path dir = output_dir(c);
  std::vector<std::string> files;

  const fs::path model_path = dir / "model.json";
  save_model(model_path.string(), model, data.labels, cfg);
  files.push_back(model_path.string());

  const fs::path trace_path = dir / "trace.csv";
  {
    auto out = open_out(trace_path);
    out << "outer,objective_start,objective_end,q_start,q_end,log_likelihood_start,"
           "log_likelihood_end,f1\n";
    for (const auto& r : result.trace) {
      out << r.outer << ',' << r.objective_start << ',' << r.objective_end << ',' << r.q_start
          << ',' << r.q_end << ',' << r.log_likelihood_start << ',' << r.log_likelihood_end
          << ',';
      if (r.f1) out << *r.f1;
      out << '\n';
    }
    finish(out, trace_path);
  }
  files.push_back(trace_path.string());

  const Prediction pred = predict_labels(model, feats.x, data.annotations);
  const fs::path pred_path = dir / "predictions.csv";
  {
    auto out = open_out(pred_path);
    out << "instance_id,label";
    for (const auto& name : data.labels.names()) out << ',' << csv_quote("p_" + name);
    out << '\n';
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
      out << csv_quote(data.instances[i].id) << ',' << csv_quote(data.labels.name(pred.labels[i]));
      for (std::size_t t = 0; t < T; ++t) out << ',' << pred.posterior(i, t);
      out << '\n';
    }
    finish(out, pred_path);
  }
  files.push_back(pred_path.string());

  const ReliabilityScores scores = reliability_scores(model, feats.x, data.annotations);
  const fs::path rel_path = dir / "reliability.csv";
  {
    auto out = open_out(rel_path);
    out << "instance_id,annotator_id,label,posterior,prior\n";
    const auto& triples = data.annotations.triples();
    for (std::size_t k = 0; k < triples.size(); ++k) {
      const auto& a = triples[k];
      out << csv_quote(data.instances[a.instance].id) << ','
          << csv_quote(data.annotations.annotator_ids[a.annotator]) << ','
          << csv_quote(data.labels.name(a.label)) << ',' << scores.posterior[k] << ','
          << scores.prior(a.instance, a.annotator) << '\n';
    }
    finish(out, rel_path);
  }
  files.push_back(rel_path.string());

  TrainOutput out;
  out.directory = dir.string();
  out.outer_iterations = result.trace.size();
  out.stopped_early = result.stopped_early;
  if (gold) out.final_f1 = f1_score(pred.labels, *gold).micro;

  nlohmann::json m;
  m["format"] = "crowdrel-run";
  m["version"] = 1;
  m["config_hash"] = c.hash();
  m["seed"] = cfg.seed;
  m["features"] = feats.kind;
  m["feature_dim"] = feats.x.cols;
  m["config"] = to_json(cfg);
  m["outer_iterations"] = out.outer_iterations;
  m["stopped_early"] = out.stopped_early;
  m["files"] = {{"model", "model.json"},
                {"trace", "trace.csv"},
                {"predictions", "predictions.csv"},
                {"reliability", "reliability.csv"}};
  const fs::path manifest_path = dir / "train_manifest.json";
  write_manifest(manifest_path, m);
  files.push_back(manifest_path.string());
  out.files = files;

  if (log) {
    std::string msg = "trained " + std::to_string(out.outer_iterations) + " outer iterations";
    if (out.stopped_early) msg += " (early stop)";
    if (out.final_f1) {
      std::ostringstream f;
      f << std::fixed << std::setprecision(4) << *out.final_f1;
      msg += ", F1 " + f.str();
    }
    log(msg + " -> " + out.directory);
  }
  return out;
}

// ---- eval ----

namespace {

void read_csv(const fs::path& path, const std::vector<std::string>& header_prefix,
              const std::function<void(const std::vector<std::string>&, std::size_t)>& row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "missing input " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < header_prefix.size() ||
      !std::equal(header_prefix.begin(), header_prefix.end(), header.begin()))
    throw Error(ErrorKind::parse, path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected " + std::to_string(header.size()) + " fields");
    row(f, line_no);
  }
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

EvalOutput cmd_eval(const ExperimentConfig& c, const Logger& log) {
  const DataBundle data = load_data(c);
  if (!data.gold || data.gold->empty())
    throw Error(ErrorKind::validation, "eval needs gold labels");
  const GoldLabels& gold = *data.gold;
  const std::size_t T = data.labels.size();
  const std::size_t N = data.instances.size();
  const AnnotationSet& ann = data.annotations;

  const fs::path dir = output_dir(c);
  const fs::path run = c.has("run") ? fs::path(c.get("run")) : dir;

  std::unordered_map<std::string, std::size_t> inst_index;
  for (std::size_t i = 0; i < N; ++i) inst_index.emplace(data.instances[i].id, i);

  const auto metrics_wanted = split_list(c.get("metrics"));
  auto wants = [&](const std::string& m) {
    return std::find(metrics_wanted.begin(), metrics_wanted.end(), m) != metrics_wanted.end();
  };
  for (const auto& m : metrics_wanted)
    if (m != "f1" && m != "mv" && m != "ds")
      throw Error(ErrorKind::argument, "metrics: unknown entry '" + m + "'");

  const std::string denoise = c.get("denoise");
  if (!denoise.empty() && denoise != "mv" && denoise != "ds")
    throw Error(ErrorKind::argument, "denoise: expected mv or ds");
  const std::size_t report_k = parse_u64(c, "report_k");
  const bool need_scores = !denoise.empty() || report_k > 0;

  EvalOutput out;
  out.directory = dir.string();
  std::ostringstream text;

  if (wants("f1")) {
    std::vector<std::size_t> pred(N, T);
    read_csv(run / "predictions.csv", {"instance_id", "label"},
             [&](const std::vector<std::string>& f, std::size_t line_no) {
               const auto it = inst_index.find(f[0]);
               const auto label = data.labels.index_of(f[1]);
               if (it == inst_index.end() || !label)
                 throw Error(ErrorKind::validation, "predictions.csv:" + std::to_string(line_no) +
                                                        ": unknown instance or label");
               pred[it->second] = *label;
             });
    for (std::size_t i = 0; i < N; ++i)
      if (pred[i] == T && gold.count(i))
        throw Error(ErrorKind::validation, "no prediction for instance " + data.instances[i].id);
    const F1Scores s = f1_score(pred, gold);
    out.metrics.emplace_back("model_f1_micro", s.micro);
    out.metrics.emplace_back("model_f1_macro", s.macro);
  }
  if (wants("mv")) {
    const F1Scores s = f1_score(majority_vote(ann, T), gold);
    out.metrics.emplace_back("mv_f1_micro", s.micro);
    out.metrics.emplace_back("mv_f1_macro", s.macro);
  }
  if (wants("ds")) {
    const F1Scores s = f1_score(dawid_skene(ann, T).hard, gold);
    out.metrics.emplace_back("ds_f1_micro", s.micro);
    out.metrics.emplace_back("ds_f1_macro", s.macro);
  }
  if (parse_bool(c, "iaa")) {
    if (ann.is_complete_panel())
      out.metrics.emplace_back("fleiss_kappa", fleiss_kappa(ann, T));
    else
      out.metrics.emplace_back("krippendorff_alpha", krippendorff_alpha(ann, T));
  }

  text << "metric                  value\n";
  for (const auto& [name, value] : out.metrics) {
    text << name << std::string(name.size() < 24 ? 24 - name.size() : 1, ' ') << fmt(value)
         << '\n';
  }

  std::vector<double> scores;
  if (need_scores) {
    std::map<std::pair<std::size_t, std::size_t>, double> by_pair;
    std::unordered_map<std::string, std::size_t> annotator_index;
    for (std::size_t j = 0; j < ann.annotator_ids.size(); ++j)
      annotator_index.emplace(ann.annotator_ids[j], j);
    read_csv(run / "reliability.csv", {"instance_id", "annotator_id", "label", "posterior"},
             [&](const std::vector<std::string>& f, std::size_t line_no) {
               const auto i = inst_index.find(f[0]);
               const auto j = annotator_index.find(f[1]);
               if (i == inst_index.end() || j == annotator_index.end())
                 throw Error(ErrorKind::validation, "reliability.csv:" + std::to_string(line_no) +
                                                        ": unknown instance or annotator");
               try {
                 by_pair[{i->second, j->second}] = std::stod(f[3]);
               } catch (const std::exception&) {
                 throw Error(ErrorKind::parse,
                             "reliability.csv:" + std::to_string(line_no) + ": bad posterior");
               }
             });
    for (const auto& a : ann.triples()) {
      const auto it = by_pair.find({a.instance, a.annotator});
      if (it == by_pair.end())
        throw Error(ErrorKind::validation, "reliability.csv lacks a score for " +
                                               data.instances[a.instance].id + "/" +
                                               ann.annotator_ids[a.annotator]);
      scores.push_back(it->second);
    }
  }

  if (!denoise.empty()) {
    Aggregator agg;
    if (denoise == "mv")
      agg = [T](const AnnotationSet& a) { return majority_vote(a, T); };
    else
      agg = [T](const AnnotationSet& a) { return dawid_skene(a, T).hard; };
    const DenoiseResult d = denoise_experiment(ann, scores, agg, gold);
    out.metrics.emplace_back("denoise_" + denoise + "_before", d.f1_before);
    out.metrics.emplace_back("denoise_" + denoise + "_after", d.f1_after);
    out.metrics.emplace_back("denoise_" + denoise + "_delta", d.delta);

    const fs::path path = dir / "denoise.csv";
    auto f = open_out(path);
    f << "aggregator,f1_before,f1_after,delta,removed,skipped\n"
      << denoise << ',' << d.f1_before << ',' << d.f1_after << ',' << d.delta << ','
      << d.removed << ',' << d.skipped << '\n';
    finish(f, path);
    out.files.push_back(path.string());

    text << "\ndenoise (" << denoise << ")\n"
         << "before    after     delta     removed  skipped\n"
         << fmt(d.f1_before) << "    " << fmt(d.f1_after) << "    " << std::showpos
         << fmt(d.delta) << std::noshowpos << "   " << d.removed << "      " << d.skipped
         << '\n';
  }

  if (report_k > 0) {
    const ReliabilityReport report = reliability_report(scores, ann, gold, T, report_k);
    text << '\n';
    write_report_text(text, report, ann, data.labels);
    const fs::path path = dir / "reliability_report.csv";
    auto f = open_out(path);
    write_report_csv(f, report, ann, data.labels);
    finish(f, path);
    out.files.push_back(path.string());
  }

  {
    const fs::path path = dir / "metrics.csv";
    auto f = open_out(path);
    f << "metric,value\n";
    for (const auto& [name, value] : out.metrics) f << name << ',' << value << '\n';
    finish(f, path);
    out.files.insert(out.files.begin(), path.string());
  }
  out.text = text.str();
  {
    const fs::path path = dir / "report.txt";
    auto f = open_out(path);
    f << out.text;
    finish(f, path);
    out.files.push_back(path.string());
  }

  nlohmann::json m;
  m["format"] = "crowdrel-eval";
  m["version"] = 1;
  m["config_hash"] = c.hash();
  m["seed"] = parse_u64(c, "seed");
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : out.files) files.push_back(fs::path(f).filename().string());
  m["files"] = files;
  const fs::path manifest_path = dir / "eval_manifest.json";
  write_manifest(manifest_path, m);
  out.files.push_back(manifest_path.string());

  if (log) log("evaluated " + std::to_string(out.metrics.size()) + " metrics -> " + out.directory);
  return out;
}

}  // namespace crowdrel
