// crowdrel command-line front end. Talks to the library only through crowdrel.h.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdrel/crowdrel.h"

namespace {

struct Flag {
  const char* name;  // long flag and config key share this spelling
  const char* help;
};

const std::vector<Flag> kSimulateFlags = {
    {"dataset", "moon, circle, three-class or text"},
    {"n", "number of instances (1000; text 500)"},
    {"noise", "generator noise, dataset default when unset"},
    {"text-labels", "classes for the text generator"},
    {"panel", "standard, graded, or comma-separated profiles (narrow-0,broad,random,...)"},
    {"keep-prob", "probability each annotator labels an instance"},
};

const std::vector<Flag> kDataFlags = {
    {"data", "dataset directory written by simulate (defaults to --out)"},
    {"instances", "instances file"},
    {"annotations", "annotations CSV"},
    {"gold", "gold labels CSV"},
    {"format", "dense-csv or text-jsonl"},
    {"labels", "comma-separated label set"},
    {"featurizer", "auto, none, tfidf or embedding"},
    {"embeddings", "word vector file for the embedding featurizer"},
};

const std::vector<Flag> kTrainFlags = {
    {"mode", "em, ce-alt or ce-jt"},
    {"pretrain", "mv or ds"},
    {"inner", "gradient steps per outer iteration"},
    {"max-outer", "outer iteration cap (500 for em, 20 otherwise); 0 keeps the pretrained model"},
    {"tol", "early stopping tolerance"},
    {"pretrain-epochs", "pretraining epochs"},
    {"pretrain-batch", "pretraining minibatch size"},
    {"classifier-hidden", "classifier hidden width"},
    {"estimator-hidden", "reliability estimator hidden width"},
    {"estimator-input", "classifier-hidden or raw-feature"},
    {"lr", "Adam step size"},
    {"weight-decay", "L2 weight decay"},
    {"clip", "gradient norm clip"},
};

const std::vector<Flag> kEvalFlags = {
    {"run", "directory holding predictions.csv and reliability.csv (defaults to --out)"},
    {"metrics", "comma-separated subset of f1,mv,ds"},
    {"denoise", "drop each instance's least reliable label, then rerun mv or ds"},
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  bool iaa = false;
  std::string report_k;
};

void add_flags(Command& cmd, const std::vector<Flag>& flags, const std::string& group) {
  for (const auto& f : flags) {
    auto* opt = cmd.app->add_option("--" + std::string(f.name), cmd.values[f.name], f.help)
                    ->group(group);
    cmd.options.emplace_back(f.name, opt);
  }
}

Command& add_command(CLI::App& app, std::vector<Command>& store, const char* name,
                     const char* help) {
  Command& cmd = store.emplace_back();
  cmd.app = app.add_subcommand(name, help);
  cmd.app->add_option("-c,--config", cmd.config_file, "key = value config file")
      ->check(CLI::ExistingFile);
  cmd.app->add_option("--set", cmd.overrides, "extra key=value setting (repeatable)");
  for (const Flag& f : {Flag{"out", "output directory ($CROWDREL_OUT_DIR or ./crowdrel-out)"},
                        Flag{"seed", "random seed"}}) {
    auto* opt = cmd.app->add_option("--" + std::string(f.name), cmd.values[f.name], f.help);
    cmd.options.emplace_back(f.name, opt);
  }
  return cmd;
}

int exit_code(crowdrel_status s) {
  switch (s) {
    case CROWDREL_OK: return 0;
    case CROWDREL_E_PARSE:
    case CROWDREL_E_DIMENSION:
    case CROWDREL_E_LABEL:
    case CROWDREL_E_DUPLICATE:
    case CROWDREL_E_VALIDATION:
    case CROWDREL_E_ARGUMENT: return 1;
    default: return 2;
  }
}

int fail(crowdrel_status s) {
  std::fprintf(stderr, "crowdrel: %s: %s\n", crowdrel_status_name(s), crowdrel_last_error());
  return exit_code(s);
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truth inference and per-instance annotator reliability from crowd labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(crowdrel_version()));

  std::vector<Command> commands;
  commands.reserve(3);
  Command& sim = add_command(app, commands, "simulate", "generate a dataset and simulated annotations");
  add_flags(sim, kSimulateFlags, "Dataset");
  Command& tr = add_command(app, commands, "train", "pretrain and train the reliability model");
  add_flags(tr, kDataFlags, "Data");
  add_flags(tr, kTrainFlags, "Model");
  Command& ev = add_command(app, commands, "eval", "score predictions, baselines and reliability");
  add_flags(ev, kDataFlags, "Data");
  add_flags(ev, kEvalFlags, "Evaluation");
  ev.app->add_flag("--iaa", ev.iaa, "Fleiss kappa on complete panels, Krippendorff alpha otherwise")
      ->group("Evaluation");
  ev.app->add_option("--report-reliability", ev.report_k,
                     "per-annotator table of the k most and least reliable labels")
      ->group("Evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (Command& cmd : commands) {
    if (!cmd.app->parsed()) continue;

    crowdrel_config* config = nullptr;
    if (crowdrel_status s = crowdrel_config_new(&config); s != CROWDREL_OK) return fail(s);
    auto run = [&]() -> crowdrel_status {
      crowdrel_status s = CROWDREL_OK;
      if (!cmd.config_file.empty() &&
          (s = crowdrel_config_load_file(config, cmd.config_file.c_str())) != CROWDREL_OK)
        return s;
      for (const auto& kv : cmd.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::fprintf(stderr, "crowdrel: --set expects key=value, got '%s'\n", kv.c_str());
          return CROWDREL_E_ARGUMENT;
        }
        s = crowdrel_config_set(config, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (s != CROWDREL_OK) return s;
      }
      for (const auto& [key, opt] : cmd.options)
        if (opt->count() > 0 &&
            (s = crowdrel_config_set(config, key.c_str(), cmd.values[key].c_str())) != CROWDREL_OK)
          return s;
      if (cmd.iaa && (s = crowdrel_config_set(config, "iaa", "true")) != CROWDREL_OK) return s;
      if (!cmd.report_k.empty() &&
          (s = crowdrel_config_set(config, "report_k", cmd.report_k.c_str())) != CROWDREL_OK)
        return s;

      const std::string name = cmd.app->get_name();
      if (name == "simulate") return crowdrel_simulate(config, print_line, nullptr);
      if (name == "train") return crowdrel_train(config, print_line, nullptr);
      return crowdrel_eval(config, print_line, nullptr);
    };
    const crowdrel_status s = run();
    crowdrel_config_free(config);
    if (s != CROWDREL_OK) return fail(s);
  }
  return 0;
}
