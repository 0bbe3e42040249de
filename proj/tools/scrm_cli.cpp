// scrm: build-graphs | train | evaluate | ablate | synth
//
// Every RunConfig field is a kebab-case flag. `--config FILE` loads a
// key = value file first; flags given on the command line override it.
// Exit codes: 0 success, 1 internal error, 2 bad input or configuration.

#include "scrm/commands.hpp"

#include <CLI11.hpp>

#include <cstring>
#include <iostream>
#include <sstream>

namespace {

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return std::string(a.substr(9));
  }
  return {};
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::stringstream ss(r);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!(tok = scrm::trim(tok)).empty()) out.push_back(tok);
  }
  return out;
}

void bind_fields(CLI::App& cmd, scrm::RunConfig& cfg) {
  cmd.add_option("--config", "key = value file loaded before the other flags");
  scrm::visit_fields(cfg, [&](std::string_view key, auto& field, const char* help) {
    const std::string name = "--" + std::string(key);
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, scrm::AblationFlags>) {
      cmd.add_option_function<std::vector<std::string>>(
             name,
             [&field, key](const std::vector<std::string>& v) {
               std::string joined;
               for (const auto& s : v) joined += (joined.empty() ? "" : ",") + s;
               scrm::from_text(key, joined, field);
             },
             help)
          ->type_name("NAME[,NAME...]");
    } else {
      cmd.add_option_function<std::string>(
             name, [&field, key](const std::string& v) { scrm::from_text(key, v, field); }, help)
          ->type_name("VALUE")
          ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  scrm::RunConfig cfg;
  try {
    if (const std::string path = find_config_path(argc, argv); !path.empty()) {
      cfg = scrm::load_config(path);
    }
  } catch (const scrm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"SCRM session recommender: graph building, training, evaluation and ablations"};
  app.require_subcommand(1);
  std::string save_config;

  auto* build = app.add_subcommand("build-graphs", "build relation graphs and stats from events");
  auto* train = app.add_subcommand("train", "train a model and write the best checkpoint");
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  auto* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted relations");

  bool with_baselines = false;
  std::vector<std::string> variants_raw, seeds_raw;
  eval->add_flag("--with-baselines", with_baselines, "also evaluate POP and ItemKNN");
  ablate->add_option("--variants", variants_raw,
                     "subset of: full,no_ex,no_se,no_denoise,sub_only,comp_only,mix_graphs,"
                     "no_integration,wgat2,wgat3");
  ablate->add_option("--seeds", seeds_raw, "comma list of seeds (default: --seed)");

  for (auto* cmd : {build, train, eval, ablate, synth}) {
    bind_fields(*cmd, cfg);
    cmd->add_option("--save-config", save_config, "write the effective config to this file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const scrm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    scrm::validate(cfg);
    if (!save_config.empty()) scrm::detail::write_text(save_config, scrm::config_text(cfg));
    std::ostream& log = std::cerr;
    if (*build) {
      scrm::cmd_build_graphs(cfg, log);
    } else if (*train) {
      scrm::cmd_train(cfg, log);
    } else if (*eval) {
      scrm::cmd_evaluate(cfg, with_baselines, log);
    } else if (*ablate) {
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(seeds_raw)) {
        std::uint64_t v = 0;
        scrm::from_text("seeds", s, v);
        seeds.push_back(v);
      }
      if (seeds.empty()) seeds.push_back(cfg.train.seed);
      scrm::cmd_ablate(cfg, split_list(variants_raw), seeds, log);
    } else if (*synth) {
      scrm::cmd_synth(cfg, log);
    }
  } catch (const scrm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_input_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
