#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kld/cli.hpp"
#include "kld/config.hpp"
#include "kld/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kinetic large-deviation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  for (const auto& name : kld::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "base seed for simulate");
    sub->add_option("--threads", threads, "worker threads (default: KLD_THREADS, else all cores)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kld::kExitOk : kld::kExitInternal;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (threads) kld::set_thread_count(*threads);
  kld::RunConfig cfg;
  try {
    cfg = kld::load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kld %s: config error: %s\n", name.c_str(), e.what());
    return kld::kExitInternal;
  }
  return kld::dispatch(name, cfg, out_dir, {seed});
}
