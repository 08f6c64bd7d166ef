#include "crowdrel/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <tuple>
#include <cctype>

#include <json.hpp>

#include "crowdrel/error.hpp"

namespace crowdrel {

const char* error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::label: return "label";
    case ErrorKind::duplicate: return "duplicate";
    case ErrorKind::validation: return "validation";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
    case ErrorKind::argument: return "argument";
  }
  return "unknown";
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  return out;
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

double parse_double(const std::string& field, const std::string& at) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, at + ": not a number: '" + field + "'");
  }
  while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
  if (used != field.size())
    throw Error(ErrorKind::parse, at + ": not a number: '" + field + "'");
  return value;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

// Reads header + rows of exactly `width` fields. Calls fn(fields, line_no).
template <typename Fn>
void read_table(const std::string& path, std::size_t width,
                const std::vector<std::string>& expected_header, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (!expected_header.empty() && fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw Error(ErrorKind::parse,
                    where(path, line_no) + ": expected header '" + want + "'");
      }
      continue;
    }
    if (fields.size() != width)
      throw Error(ErrorKind::parse, where(path, line_no) + ": expected " +
                                        std::to_string(width) + " fields, got " +
                                        std::to_string(fields.size()));
    fn(fields, line_no);
  }
}

}  // namespace

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2)
    throw Error(ErrorKind::label, "a label set needs at least two labels");
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (!index_.emplace(labels_[k], k).second)
      throw Error(ErrorKind::duplicate, "duplicate label '" + labels_[k] + "'");
  }
}

std::optional<std::size_t> LabelSet::index_of(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IdIndex::IdIndex(std::vector<std::string> ids) {
  for (auto& id : ids) {
    if (find(id)) throw Error(ErrorKind::duplicate, "duplicate id '" + id + "'");
    intern(id);
  }
}

std::size_t IdIndex::intern(const std::string& id) {
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<std::size_t> IdIndex::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Matrix feature_matrix(std::span<const Instance> instances) {
  Matrix m;
  m.rows = instances.size();
  m.cols = instances.empty() ? 0 : instances.front().features.size();
  m.values.reserve(m.rows * m.cols);
  for (const auto& inst : instances) {
    if (inst.features.size() != m.cols)
      throw Error(ErrorKind::dimension, "instance '" + inst.id + "' has " +
                                            std::to_string(inst.features.size()) +
                                            " features, expected " +
                                            std::to_string(m.cols));
    m.values.insert(m.values.end(), inst.features.begin(), inst.features.end());
  }
  return m;
}

AnnotationSet::AnnotationSet(std::size_t n_instances, std::size_t n_annotators,
                             std::vector<Annotation> triples)
    : n_instances_(n_instances),
      n_annotators_(n_annotators),
      triples_(std::move(triples)) {
  std::stable_sort(triples_.begin(), triples_.end(),
                   [](const Annotation& a, const Annotation& b) {
                     return std::tie(a.instance, a.annotator) <
                            std::tie(b.instance, b.annotator);
                   });
  for (std::size_t k = 0; k < triples_.size(); ++k) {
    const auto& t = triples_[k];
    if (t.instance >= n_instances_ || t.annotator >= n_annotators_)
      throw Error(ErrorKind::dimension,
                  "annotation (" + std::to_string(t.instance) + ", " +
                      std::to_string(t.annotator) + ") out of range");
    if (k > 0 && triples_[k - 1].instance == t.instance &&
        triples_[k - 1].annotator == t.annotator)
      throw Error(ErrorKind::duplicate,
                  "duplicate annotation for instance " + std::to_string(t.instance) +
                      ", annotator " + std::to_string(t.annotator));
  }
  offsets_.assign(n_instances_ + 1, 0);
  for (const auto& t : triples_) ++offsets_[t.instance + 1];
  for (std::size_t i = 0; i < n_instances_; ++i) offsets_[i + 1] += offsets_[i];
}

std::span<const Annotation> AnnotationSet::of_instance(std::size_t i) const {
  return {triples_.data() + offsets_.at(i), offsets_.at(i + 1) - offsets_.at(i)};
}

bool AnnotationSet::is_complete_panel() const {
  if (n_instances_ == 0) return false;
  const auto first = of_instance(0).size();
  if (first == 0) return false;
  for (std::size_t i = 1; i < n_instances_; ++i)
    if (of_instance(i).size() != first) return false;
  return true;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::vector<Instance> load_instances(const std::string& path,
                                     InstanceFormat format) {
  std::vector<Instance> out;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> first_line;
  auto add = [&](Instance inst) {
    auto [it, inserted] = first_line.emplace(inst.id, line_no);
    if (!inserted)
      throw Error(ErrorKind::duplicate, where(path, line_no) + ": duplicate instance id '" +
                                            inst.id + "' (first at line " +
                                            std::to_string(it->second) + ")");
    out.push_back(std::move(inst));
  };

  if (format == InstanceFormat::text_jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (blank(line)) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, where(path, line_no) + ": " + e.what());
      }
      if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
          !obj["text"].is_string())
        throw Error(ErrorKind::parse,
                    where(path, line_no) + ": expected object with 'id' and 'text'");
      Instance inst;
      inst.id = obj["id"].is_string() ? obj["id"].get<std::string>() : obj["id"].dump();
      inst.text.push_back(obj["text"].get<std::string>());
      if (obj.contains("text_pair")) {
        if (!obj["text_pair"].is_string())
          throw Error(ErrorKind::parse, where(path, line_no) + ": 'text_pair' must be a string");
        inst.text.push_back(obj["text_pair"].get<std::string>());
      }
      if (!out.empty() && out.front().text.size() != inst.text.size())
        throw Error(ErrorKind::dimension,
                    where(path, line_no) + ": mixed single and paired text instances");
      add(std::move(inst));
    }
    return out;
  }

  std::size_t width = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 2 || fields.front() != "id")
        throw Error(ErrorKind::parse,
                    where(path, line_no) + ": header must be 'id,<feature columns>'");
      width = fields.size();
      continue;
    }
    if (fields.size() != width)
      throw Error(ErrorKind::dimension, where(path, line_no) + ": expected " +
                                            std::to_string(width) + " fields, got " +
                                            std::to_string(fields.size()));
    Instance inst;
    inst.id = fields.front();
    inst.features.reserve(width - 1);
    for (std::size_t k = 1; k < width; ++k)
      inst.features.push_back(parse_double(fields[k], where(path, line_no)));
    add(std::move(inst));
  }
  return out;
}

AnnotationSet load_annotations(const std::string& path, const LabelSet& labels,
                               IdIndex instances, IdIndex annotators) {
  std::vector<Annotation> triples;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  read_table(path, 3, {"instance_id", "annotator_id", "label"},
             [&](const std::vector<std::string>& f, std::size_t line_no) {
               auto label = labels.index_of(f[2]);
               if (!label)
                 throw Error(ErrorKind::label,
                             where(path, line_no) + ": unknown label '" + f[2] + "'");
               Annotation a{instances.intern(f[0]), annotators.intern(f[1]), *label};
               auto [it, inserted] = seen.emplace(std::pair{a.instance, a.annotator}, line_no);
               if (!inserted)
                 throw Error(ErrorKind::duplicate,
                             where(path, line_no) + ": duplicate annotation of '" + f[0] +
                                 "' by '" + f[1] + "' (first at line " +
                                 std::to_string(it->second) + ")");
               triples.push_back(a);
             });
  AnnotationSet set(instances.size(), annotators.size(), std::move(triples));
  set.instance_ids = instances.ids();
  set.annotator_ids = annotators.ids();
  return set;
}

GoldLabels load_gold(const std::string& path, const LabelSet& labels,
                     IdIndex& instances) {
  GoldLabels gold;
  read_table(path, 2, {"instance_id", "label"},
             [&](const std::vector<std::string>& f, std::size_t line_no) {
               auto label = labels.index_of(f[1]);
               if (!label)
                 throw Error(ErrorKind::label,
                             where(path, line_no) + ": unknown label '" + f[1] + "'");
               auto i = instances.intern(f[0]);
               if (!gold.emplace(i, *label).second)
                 throw Error(ErrorKind::duplicate,
                             where(path, line_no) + ": duplicate gold label for '" +
                                 f[0] + "'");
             });
  return gold;
}

void write_instances_csv(const std::string& path,
                         std::span<const Instance> instances) {
  auto out = open_output(path);
  const std::size_t dim = instances.empty() ? 0 : instances.front().features.size();
  out << "id";
  for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& inst : instances) {
    out << csv_field(inst.id);
    for (double v : inst.features) out << ',' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_instances_jsonl(const std::string& path,
                           std::span<const Instance> instances) {
  auto out = open_output(path);
  for (const auto& inst : instances) {
    if (inst.text.empty() || inst.text.size() > 2)
      throw Error(ErrorKind::validation, "instance '" + inst.id + "' has no text");
    nlohmann::json obj;
    obj["id"] = inst.id;
    obj["text"] = inst.text[0];
    if (inst.text.size() == 2) obj["text_pair"] = inst.text[1];
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_annotations_csv(const std::string& path,
                           const AnnotationSet& annotations,
                           const LabelSet& labels) {
  auto out = open_output(path);
  out << "instance_id,annotator_id,label\n";
  for (const auto& a : annotations.triples()) {
    const std::string inst = a.instance < annotations.instance_ids.size()
                                 ? annotations.instance_ids[a.instance]
                                 : std::to_string(a.instance);
    const std::string ann = a.annotator < annotations.annotator_ids.size()
                                ? annotations.annotator_ids[a.annotator]
                                : std::to_string(a.annotator);
    out << csv_field(inst) << ',' << csv_field(ann) << ','
        << csv_field(labels.name(a.label)) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_gold_csv(const std::string& path, const GoldLabels& gold,
                    const std::vector<std::string>& instance_ids,
                    const LabelSet& labels) {
  auto out = open_output(path);
  out << "instance_id,label\n";
  for (const auto& [i, label] : gold) {
    const std::string inst =
        i < instance_ids.size() ? instance_ids[i] : std::to_string(i);
    out << csv_field(inst) << ',' << csv_field(labels.name(label)) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

std::vector<std::string> validate(std::span<const Instance> instances,
                                  const AnnotationSet& annotations,
                                  std::size_t n_labels, const GoldLabels* gold) {
  std::vector<std::string> report;
  const std::size_t n = instances.size();

  if (!instances.empty()) {
    const bool dense = !instances.front().features.empty();
    const std::size_t dim = instances.front().features.size();
    for (const auto& inst : instances) {
      if (dense && inst.features.size() != dim)
        report.push_back("instance '" + inst.id + "' has " +
                         std::to_string(inst.features.size()) + " features, expected " +
                         std::to_string(dim));
      if (dense != !inst.features.empty())
        report.push_back("instance '" + inst.id + "' mixes payload kinds");
      for (std::size_t d = 0; d < inst.features.size(); ++d)
        if (!std::isfinite(inst.features[d])) {
          report.push_back("instance '" + inst.id + "' feature " + std::to_string(d) +
                           " is not finite");
          break;
        }
    }
  }

  std::vector<std::size_t> coverage(n, 0);
  for (const auto& a : annotations.triples()) {
    if (a.instance >= n) {
      report.push_back("annotation references instance " + std::to_string(a.instance) +
                       " of " + std::to_string(n));
      continue;
    }
    if (a.label >= n_labels)
      report.push_back("annotation of instance " + std::to_string(a.instance) +
                       " has label index " + std::to_string(a.label) + " >= " +
                       std::to_string(n_labels));
    ++coverage[a.instance];
  }
  for (std::size_t i = 0; i < n; ++i)
    if (coverage[i] == 0)
      report.push_back("instance '" + instances[i].id + "' has no annotations");

  if (gold) {
    for (const auto& [i, label] : *gold) {
      if (i >= n)
        report.push_back("gold label references instance " + std::to_string(i) +
                         " of " + std::to_string(n));
      else if (label >= n_labels)
        report.push_back("gold label of instance " + std::to_string(i) +
                         " out of range");
    }
  }
  return report;
}

}  // namespace crowdrel
