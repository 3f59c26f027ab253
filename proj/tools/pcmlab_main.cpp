#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pcmlab/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pcmlab: large-N principal chiral model numerics"};
  app.require_subcommand(1);

  pcm::RunRequest request;
  unsigned workers = 0;
  for (const auto& name : pcm::subcommand_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", request.config_path, "campaign configuration (INI)")->required();
    sub->add_option("--out", request.out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads, 0 = all cores (overrides run.workers)");
    sub->callback([&request, name] { request.subcommand = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (const auto* sub : app.get_subcommands()) {
    if (sub->count("--workers") > 0) request.workers = workers;
  }
  return pcm::run_campaign(request, std::cout, std::cerr);
}
