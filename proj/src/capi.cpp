#include "crowdrel/crowdrel.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "crowdrel/baselines.hpp"
#include "crowdrel/error.hpp"
#include "crowdrel/eval.hpp"
#include "crowdrel/experiment.hpp"
#include "crowdrel/model.hpp"

using namespace crowdrel;

struct crowdrel_config {
  ExperimentConfig cfg;
};

struct crowdrel_dataset {
  DataBundle data;
  Features features;
};

struct crowdrel_model {
  ReliabilityModel model;
  LabelSet labels;
  TrainConfig config;
  std::size_t outer_iterations = 0;
};

namespace {

thread_local std::string g_last_error;

crowdrel_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return CROWDREL_E_PARSE;
    case ErrorKind::dimension: return CROWDREL_E_DIMENSION;
    case ErrorKind::label: return CROWDREL_E_LABEL;
    case ErrorKind::duplicate: return CROWDREL_E_DUPLICATE;
    case ErrorKind::validation: return CROWDREL_E_VALIDATION;
    case ErrorKind::numerical: return CROWDREL_E_NUMERICAL;
    case ErrorKind::io: return CROWDREL_E_IO;
    case ErrorKind::argument: return CROWDREL_E_ARGUMENT;
  }
  return CROWDREL_E_INTERNAL;
}

template <class F>
crowdrel_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CROWDREL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return CROWDREL_E_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::argument, what);
}

Logger make_logger(crowdrel_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

}  // namespace

extern "C" {

const char* crowdrel_version(void) { return "0.1.0"; }

const char* crowdrel_last_error(void) { return g_last_error.c_str(); }

const char* crowdrel_status_name(crowdrel_status status) {
  switch (status) {
    case CROWDREL_OK: return "ok";
    case CROWDREL_E_PARSE: return "parse error";
    case CROWDREL_E_DIMENSION: return "dimension error";
    case CROWDREL_E_LABEL: return "label error";
    case CROWDREL_E_DUPLICATE: return "duplicate error";
    case CROWDREL_E_VALIDATION: return "validation error";
    case CROWDREL_E_NUMERICAL: return "numerical error";
    case CROWDREL_E_IO: return "io error";
    case CROWDREL_E_ARGUMENT: return "argument error";
    case CROWDREL_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

crowdrel_status crowdrel_config_new(crowdrel_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    *out = new crowdrel_config();
  });
}

void crowdrel_config_free(crowdrel_config* config) { delete config; }

crowdrel_status crowdrel_config_set(crowdrel_config* config, const char* key,
                                    const char* value) {
  return guarded([&] {
    require(config && key && value, "null argument");
    config->cfg.set(key, value);
  });
}

crowdrel_status crowdrel_config_load_file(crowdrel_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "null argument");
    config->cfg.load_file(path);
  });
}

crowdrel_status crowdrel_config_get(const crowdrel_config* config, const char* key, char* buf,
                                    size_t cap, size_t* needed) {
  return guarded([&] {
    require(config && key, "null argument");
    const std::string v = config->cfg.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf && cap > 0) {
      const std::size_t n = std::min(v.size(), cap - 1);
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

crowdrel_status crowdrel_config_hash(const crowdrel_config* config, char* buf, size_t cap) {
  return guarded([&] {
    require(config && buf, "null argument");
    require(cap >= 17, "hash buffer needs 17 bytes");
    const std::string h = config->cfg.hash();
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

crowdrel_status crowdrel_simulate(const crowdrel_config* config, crowdrel_log_fn log,
                                  void* user) {
  return guarded([&] {
    require(config != nullptr, "null config");
    cmd_simulate(config->cfg, make_logger(log, user));
  });
}

crowdrel_status crowdrel_train(const crowdrel_config* config, crowdrel_log_fn log, void* user) {
  return guarded([&] {
    require(config != nullptr, "null config");
    cmd_train(config->cfg, make_logger(log, user));
  });
}

crowdrel_status crowdrel_eval(const crowdrel_config* config, crowdrel_log_fn log, void* user) {
  return guarded([&] {
    require(config != nullptr, "null config");
    const Logger logger = make_logger(log, user);
    const EvalOutput out = cmd_eval(config->cfg, logger);
    if (logger) logger(out.text);
  });
}

crowdrel_status crowdrel_dataset_load(const crowdrel_config* config, crowdrel_dataset** out) {
  return guarded([&] {
    require(config && out, "null argument");
    auto d = std::make_unique<crowdrel_dataset>();
    d->data = load_data(config->cfg);
    d->features = featurize(d->data, config->cfg);
    *out = d.release();
  });
}

crowdrel_status crowdrel_dataset_generate(const char* dataset, size_t n, double noise,
                                          const char* panel, uint64_t seed,
                                          crowdrel_dataset** out) {
  return guarded([&] {
    require(dataset && panel && out, "null argument");
    ExperimentConfig c;
    c.set("dataset", dataset);
    c.set("panel", panel);
    c.set("seed", std::to_string(seed));
    if (n > 0) c.set("n", std::to_string(n));
    if (noise >= 0) {
      std::ostringstream s;
      s.precision(17);
      s << noise;
      c.set("noise", s.str());
    }
    auto d = std::make_unique<crowdrel_dataset>();
    d->data = generate_data(c);
    d->features = featurize(d->data, c);
    *out = d.release();
  });
}

void crowdrel_dataset_free(crowdrel_dataset* dataset) { delete dataset; }

size_t crowdrel_dataset_instances(const crowdrel_dataset* d) {
  return d ? d->data.instances.size() : 0;
}
size_t crowdrel_dataset_annotators(const crowdrel_dataset* d) {
  return d ? d->data.annotations.n_annotators() : 0;
}
size_t crowdrel_dataset_labels(const crowdrel_dataset* d) {
  return d ? d->data.labels.size() : 0;
}
size_t crowdrel_dataset_annotations(const crowdrel_dataset* d) {
  return d ? d->data.annotations.size() : 0;
}
size_t crowdrel_dataset_feature_dim(const crowdrel_dataset* d) {
  return d ? d->features.x.cols : 0;
}

crowdrel_status crowdrel_dataset_annotation(const crowdrel_dataset* d, size_t k,
                                            size_t* instance, size_t* annotator, size_t* label) {
  return guarded([&] {
    require(d != nullptr, "null dataset");
    const auto& triples = d->data.annotations.triples();
    require(k < triples.size(), "annotation index out of range");
    if (instance) *instance = triples[k].instance;
    if (annotator) *annotator = triples[k].annotator;
    if (label) *label = triples[k].label;
  });
}

crowdrel_status crowdrel_dataset_gold(const crowdrel_dataset* d, size_t* labels, size_t n) {
  return guarded([&] {
    require(d && labels, "null argument");
    require(n == d->data.instances.size(), "buffer length must equal the instance count");
    for (size_t i = 0; i < n; ++i) labels[i] = SIZE_MAX;
    if (d->data.gold)
      for (const auto& [i, t] : *d->data.gold) labels[i] = t;
  });
}

crowdrel_status crowdrel_majority_vote(const crowdrel_dataset* d, size_t* labels, size_t n) {
  return guarded([&] {
    require(d && labels, "null argument");
    require(n == d->data.instances.size(), "buffer length must equal the instance count");
    const auto mv = majority_vote(d->data.annotations, d->data.labels.size());
    std::copy(mv.begin(), mv.end(), labels);
  });
}

crowdrel_status crowdrel_dawid_skene(const crowdrel_dataset* d, size_t* labels, double* soft,
                                     size_t n) {
  return guarded([&] {
    require(d && labels, "null argument");
    require(n == d->data.instances.size(), "buffer length must equal the instance count");
    const DsResult r = dawid_skene(d->data.annotations, d->data.labels.size());
    std::copy(r.hard.begin(), r.hard.end(), labels);
    if (soft) std::copy(r.soft.values.begin(), r.soft.values.end(), soft);
  });
}

crowdrel_status crowdrel_f1(const crowdrel_dataset* d, const size_t* predicted, size_t n,
                            double* micro, double* macro) {
  return guarded([&] {
    require(d && predicted, "null argument");
    require(n == d->data.instances.size(), "buffer length must equal the instance count");
    if (!d->data.gold) throw Error(ErrorKind::validation, "dataset has no gold labels");
    const F1Scores s =
        f1_score(std::span<const std::size_t>(predicted, n), *d->data.gold);
    if (micro) *micro = s.micro;
    if (macro) *macro = s.macro;
  });
}

crowdrel_status crowdrel_agreement(const crowdrel_dataset* d, double* value, int* is_kappa) {
  return guarded([&] {
    require(d && value, "null argument");
    const auto& ann = d->data.annotations;
    const bool complete = ann.is_complete_panel();
    *value = complete ? fleiss_kappa(ann, d->data.labels.size())
                      : krippendorff_alpha(ann, d->data.labels.size());
    if (is_kappa) *is_kappa = complete ? 1 : 0;
  });
}

crowdrel_status crowdrel_model_train(const crowdrel_dataset* d, const crowdrel_config* config,
                                     crowdrel_model** out) {
  return guarded([&] {
    require(d && config && out, "null argument");
    auto m = std::make_unique<crowdrel_model>();
    m->config = train_config(config->cfg, d->features.kind);
    m->labels = d->data.labels;
    const std::size_t T = d->data.labels.size();
    m->model = pretrain(d->features.x, d->data.annotations, T, m->config);
    if (m->config.outer_limit() > 0) {
      const TrainResult r = train(m->model, d->features.x, d->data.annotations, m->config);
      m->outer_iterations = r.trace.size();
    }
    *out = m.release();
  });
}

crowdrel_status crowdrel_model_load(const char* path, crowdrel_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    LoadedModel loaded = load_model(path);
    auto m = std::make_unique<crowdrel_model>();
    m->model = std::move(loaded.model);
    m->labels = std::move(loaded.labels);
    m->config = loaded.config;
    m->outer_iterations = m->model.outer_iteration;
    *out = m.release();
  });
}

crowdrel_status crowdrel_model_save(const crowdrel_model* m, const char* path) {
  return guarded([&] {
    require(m && path, "null argument");
    save_model(path, m->model, m->labels, m->config);
  });
}

void crowdrel_model_free(crowdrel_model* model) { delete model; }

size_t crowdrel_model_outer_iterations(const crowdrel_model* m) {
  return m ? m->outer_iterations : 0;
}

crowdrel_status crowdrel_model_predict(const crowdrel_model* m, const crowdrel_dataset* d,
                                       size_t* labels, double* posterior, size_t n) {
  return guarded([&] {
    require(m && d && labels, "null argument");
    require(n == d->data.instances.size(), "buffer length must equal the instance count");
    const Prediction p = predict_labels(m->model, d->features.x, d->data.annotations);
    std::copy(p.labels.begin(), p.labels.end(), labels);
    if (posterior) std::copy(p.posterior.values.begin(), p.posterior.values.end(), posterior);
  });
}

crowdrel_status crowdrel_model_reliability(const crowdrel_model* m, const crowdrel_dataset* d,
                                           double* scores, size_t n) {
  return guarded([&] {
    require(m && d && scores, "null argument");
    require(n == d->data.annotations.size(), "buffer length must equal the annotation count");
    const ReliabilityScores r = reliability_scores(m->model, d->features.x, d->data.annotations);
    std::copy(r.posterior.begin(), r.posterior.end(), scores);
  });
}

}  // extern "C"
