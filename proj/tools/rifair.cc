// rifair: train a classifier, run the attacks, evaluate, manipulate.
//
//   rifair train      --schema S --data D --seed N --out DIR
//   rifair attack     --schema S --data D --model DIR/model.json --mode all --steps 10 --out DIR
//   rifair evaluate   --out DIR [--results DIR/results.jsonl]
//   rifair manipulate --schema S --model M --budget B --strategy acc_up --out DIR

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rifair/commands.h"

int main(int argc, char** argv) {
  rifair::RunConfig cfg;
  std::string command;
  bool no_timestamps = false;

  CLI::App app{"Robust individual fairness attacks on tabular classifiers"};
  app.add_option("command", command, "train | attack | evaluate | manipulate")
      ->required()
      ->check(CLI::IsMember({"train", "attack", "evaluate", "manipulate"}));
  app.add_option("--schema", cfg.schema, "feature schema JSON");
  app.add_option("--data", cfg.data, "CSV with a header row");
  app.add_option("--model", cfg.model, "model checkpoint JSON");
  app.add_option("--results", cfg.results, "attack results JSONL (default <out>/results.jsonl)");
  app.add_option("--mode", cfg.mode, "tb | fb | ff | fgsm | adf | all");
  app.add_option("--steps", cfg.steps, "attack step limit T");
  app.add_option("--tau-dec", cfg.tau_dec, "decision threshold on the positive-class score");
  app.add_option("--budget", cfg.budget, "test items to replace");
  app.add_option("--strategy", cfg.strategy, "manipulation strategy or all");
  app.add_option("--seed", cfg.seed, "seed for splitting, training, sampling and manipulation");
  app.add_option("--out", cfg.out, "output directory");

  app.add_option("--test-fraction", cfg.test_fraction, "held-out fraction")->check(CLI::Range(0.01, 0.99));
  app.add_option("--epochs", cfg.train.epochs)->check(CLI::PositiveNumber);
  app.add_option("--batch-size", cfg.train.batch_size)->check(CLI::PositiveNumber);
  app.add_option("--lr", cfg.train.learning_rate)->check(CLI::PositiveNumber);
  app.add_option("--l2", cfg.train.l2)->check(CLI::NonNegativeNumber);
  app.add_option("--hidden", cfg.train.hidden, "hidden layer widths")->expected(1, 8);
  app.add_option("--epsilon", cfg.epsilon, "FGSM step in normalised units");
  app.add_option("--grid-points", cfg.grid_points, "continuous candidate grid size")->check(CLI::Range(2, 1000));
  app.add_option("--similar-cap", cfg.similar_cap, "max similar-set size")->check(CLI::PositiveNumber);
  app.add_option("--limit", cfg.limit, "attack only the first N test instances");
  app.add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  app.add_option("--plots", cfg.plots, "instances whose trajectories are exported");
  app.add_option("--rif-tolerance", cfg.rif_tolerance, "tau of the RIF check");
  app.add_flag("--no-timestamps", no_timestamps, "omit metadata.created");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? rifair::kExitOk : rifair::kExitUsage;
  }
  cfg.timestamps = !no_timestamps;
  return rifair::run_command(command, cfg, std::cout, std::cerr);
}
