// Command-line driver: synth, train, eval, discover, trace, gradcheck.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "kt/kt.hpp"

namespace fs = std::filesystem;
using namespace kt;

namespace {

struct Options {
  // data
  std::string dataset;
  std::string test;
  std::string ground_truth;
  std::string checkpoint;
  std::string out = ".";
  // synth
  int students = 400;
  int test_students = -1;
  int exercises = 50;
  int concepts = 5;
  int length = 50;
  double guess = 0.25;
  double learn = 0.1;
  // model and training
  std::string model = "dkvmn";
  int d = 10;
  int n = 5;
  double lr = -1;
  int batch = 32;
  int epochs = 100;
  int patience = 20;
  double sigma = 0.05;
  std::uint64_t seed = 1;
  int seeds = 1;
  double valid_fraction = 0.2;
  std::size_t max_len = 200;
  double clip = 50.0;
  // trace
  std::size_t student = 0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.kind = parse_model_kind(o.model);
  c.width = o.d;
  c.memory_size = o.n;
  c.batch_size = o.batch;
  if (o.lr >= 0) c.learning_rate = o.lr;
  c.max_epochs = o.epochs;
  c.patience = o.patience;
  c.sigma = o.sigma;
  c.seed = o.seed;
  c.clip_threshold = o.clip;
  c.max_len = o.max_len;
  return c;
}

int cmd_synth(const Options& o) {
  SynthConfig c;
  c.train_students = o.students;
  c.test_students = o.test_students < 0 ? o.students : o.test_students;
  c.exercises = o.exercises;
  c.concepts = o.concepts;
  c.sequence_length = o.length;
  c.guess = o.guess;
  c.learning_increment = o.learn;
  c.seed = o.seed;
  const auto ds = generate(c);
  ensure_dir(o.out);
  write_text_file(join(o.out, "train.txt"), write_triplet_format(ds.train));
  write_text_file(join(o.out, "test.txt"), write_triplet_format(ds.test));
  write_text_file(join(o.out, "ground_truth.csv"), ground_truth_csv(ds.truth));
  const std::size_t records = count_records(ds.train) + count_records(ds.test);
  std::cout << "students " << ds.train.size() + ds.test.size() << " (train " << ds.train.size() << ", test "
            << ds.test.size() << ")\n"
            << "exercises " << c.exercises << "\n"
            << "records " << records << "\n";
  return 0;
}

struct LoadedData {
  TripletDataset train;
  PaddedBatch train_rows, valid_rows;
  std::optional<PaddedBatch> test_rows;
};

LoadedData load_for_training(const Options& o) {
  LoadedData d;
  d.train = parse_triplet_format(read_text_file(o.dataset));
  const int Q = d.train.vocabulary.size();
  auto split = split_train_valid(d.train.sequences, o.valid_fraction, o.seed);
  d.train_rows = pad_dataset(split.first, Q, o.max_len);
  d.valid_rows = pad_dataset(split.second, Q, o.max_len);
  if (!o.test.empty()) {
    const auto raw = parse_triplet_records(read_text_file(o.test));
    d.test_rows = pad_dataset(d.train.vocabulary.remap(raw), Q, o.max_len);
  }
  return d;
}

double max_parameter_change(const KnowledgeTracer& trained, const TrainConfig& c, int Q) {
  auto init = make_model({c.kind, Q, c.width, c.memory_size}, c.sigma, c.seed);
  double worst = 0.0;
  const auto& a = init->params();
  const auto& b = trained.params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a[i].value.values();
    const auto y = b[i].value.values();
    for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] - y[j]));
  }
  return worst;
}

void print_report(const RunReport& r) {
  std::cout << "epochs " << r.epochs.size() << (r.early_stopped ? " (early stop)" : "") << "\n"
            << "parameters " << r.parameter_count << "\n"
            << "best epoch " << r.best_epoch << "\n"
            << "best valid AUC " << fmt("%.4f", r.best_valid_auc) << "\n";
  if (r.test_auc) std::cout << "test AUC " << fmt("%.4f", *r.test_auc) << "\n";
}

int cmd_train(const Options& o) {
  const auto c = train_config(o);
  auto data = load_for_training(o);
  const int Q = data.train.vocabulary.size();
  ensure_dir(o.out);

  if (o.seeds > 1) {
    if (!data.test_rows) throw std::invalid_argument("--seeds needs --test");
    const auto seeds = consecutive_seeds(o.seed, static_cast<std::size_t>(o.seeds));
    const auto runs = repeated_runs(c, seeds, Q, data.train_rows, data.valid_rows, *data.test_rows);
    for (const auto& run : runs.runs) {
      if (run.diverged) {
        std::cout << "seed " << run.seed << " diverged: " << run.error << "\n";
        continue;
      }
      write_text_file(join(o.out, "curve_seed" + std::to_string(run.seed) + ".csv"), curve_csv(run.report));
      std::cout << "seed " << run.seed << " best epoch " << run.report.best_epoch << " test AUC "
                << fmt("%.4f", *run.report.test_auc) << "\n";
    }
    if (runs.diverged() == runs.runs.size()) return 3;
    std::cout << to_string(c.kind) << " test AUC " << format_percent(runs.test_auc) << " over "
              << runs.runs.size() - runs.diverged() << " runs\n";
    return runs.diverged() ? 3 : 0;
  }

  TrainResult result;
  try {
    result = train(c, Q, data.train_rows, data.valid_rows);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  }
  if (data.test_rows) result.report.test_auc = evaluate(*result.best_model, *data.test_rows).auc;
  write_text_file(join(o.out, "model.ckpt"), save_checkpoint(*result.best_model, data.train.vocabulary));
  write_text_file(join(o.out, "vocab.txt"), data.train.vocabulary.to_text());
  write_text_file(join(o.out, "curve.csv"), curve_csv(result.report));
  print_report(result.report);
  std::cout << "max parameter change " << fmt("%.6g", max_parameter_change(*result.best_model, c, Q)) << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto ck = load_checkpoint(read_text_file(o.checkpoint));
  const auto raw = parse_triplet_records(read_text_file(o.dataset));
  const auto rows = pad_dataset(ck.vocabulary.remap(raw), ck.model->num_exercises(), o.max_len);
  const auto ev = evaluate(*ck.model, rows);
  std::cout << "test AUC " << fmt("%.4f", ev.auc) << " (" << ev.scores.size() << " points)\n";
  return 0;
}

std::vector<int> truth_for(const Vocabulary& vocab, const std::string& path) {
  std::map<long long, int> by_tag;
  for (const auto& [tag, c] : parse_ground_truth_csv(read_text_file(path))) by_tag[tag] = c;
  std::vector<int> truth;
  for (long long tag : vocab.tags()) {
    auto it = by_tag.find(tag);
    if (it == by_tag.end()) throw std::invalid_argument("ground truth has no entry for exercise " + std::to_string(tag));
    truth.push_back(it->second);
  }
  return truth;
}

int cmd_discover(const Options& o) {
  const auto ck = load_checkpoint(read_text_file(o.checkpoint));
  std::optional<std::vector<int>> truth;
  if (!o.ground_truth.empty()) truth = truth_for(ck.vocabulary, o.ground_truth);
  const auto rep = discover_concepts(*ck.model, truth ? &*truth : nullptr);
  ensure_dir(o.out);
  write_text_file(join(o.out, "weights.csv"), weight_matrix_csv(rep, &ck.vocabulary));
  write_text_file(join(o.out, "clusters.csv"), cluster_csv(rep, &ck.vocabulary));
  std::cout << "clusters " << rep.nonempty_clusters << "\n";
  if (rep.ami) std::cout << "AMI " << fmt("%.4f", *rep.ami) << "\n";
  return 0;
}

int cmd_trace(const Options& o) {
  const auto ck = load_checkpoint(read_text_file(o.checkpoint));
  const auto seqs = ck.vocabulary.remap(parse_triplet_records(read_text_file(o.dataset)));
  if (o.student >= seqs.size()) {
    throw std::out_of_range("student index " + std::to_string(o.student) + " out of range (dataset has " +
                            std::to_string(seqs.size()) + ")");
  }
  const auto tr = trace_knowledge_state(*ck.model, seqs[o.student].interactions);
  ensure_dir(o.out);
  const auto path = join(o.out, "trace_student" + std::to_string(o.student) + ".csv");
  write_text_file(path, trace_csv(tr, &ck.vocabulary));
  std::cout << "rows " << tr.states.size() << " columns " << tr.states.front().size() << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  constexpr double kThreshold = 1e-4;
  const auto kind = parse_model_kind(o.model);
  const int Q = 5;
  auto model = make_model({kind, Q, 4, 3}, 0.5, o.seed);
  StudentSequence s;
  std::mt19937_64 rng(o.seed);
  for (int t = 0; t < 6; ++t) s.interactions.push_back({static_cast<int>(rng() % Q) + 1, static_cast<int>(rng() % 2)});
  const auto row = pad_sequence(s, Q, 6).front();
  const auto rep = finite_diff_gradcheck(model->params(), [&](bool grad) {
    return grad ? model->accumulate_gradients(row, nullptr) : model->forward(row, nullptr);
  });
  const bool ok = rep.max_rel_error < kThreshold;
  std::cout << to_string(kind) << " max relative error " << fmt("%.3e", rep.max_rel_error) << " "
            << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge tracing with key-value memory networks"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);
  Options o;

  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", o.model, "dkvmn, mann or dkt")->check(CLI::IsMember({"dkvmn", "mann", "dkt"}));
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "random seed"); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory"); };
  auto add_max_len = [&](CLI::App* c) { c->add_option("--max-len", o.max_len, "chunk length")->check(CLI::PositiveNumber); };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--students", o.students, "students per split")->check(CLI::PositiveNumber);
  synth->add_option("--test-students", o.test_students, "test students (default: same as --students)");
  synth->add_option("--exercises", o.exercises)->check(CLI::PositiveNumber);
  synth->add_option("--concepts", o.concepts)->check(CLI::PositiveNumber);
  synth->add_option("--length", o.length, "interactions per student")->check(CLI::PositiveNumber);
  synth->add_option("--guess", o.guess, "guess probability")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--learn", o.learn, "ability gain per attempt");
  add_seed(synth);
  add_out(synth);

  auto* tr = app.add_subcommand("train", "train a model");
  add_model(tr);
  tr->add_option("--dataset", o.dataset, "training triplet file")->required()->check(CLI::ExistingFile);
  tr->add_option("--test", o.test, "test triplet file")->check(CLI::ExistingFile);
  tr->add_option("--d", o.d, "memory/state width")->check(CLI::PositiveNumber);
  tr->add_option("--n", o.n, "memory slots")->check(CLI::PositiveNumber);
  tr->add_option("--lr", o.lr, "initial learning rate (default per model)");
  tr->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  tr->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--patience", o.patience)->check(CLI::PositiveNumber);
  tr->add_option("--sigma", o.sigma, "init standard deviation")->check(CLI::PositiveNumber);
  tr->add_option("--seeds", o.seeds, "repeat over this many consecutive seeds")->check(CLI::PositiveNumber);
  tr->add_option("--valid-fraction", o.valid_fraction)->check(CLI::Range(0.0, 1.0));
  tr->add_option("--clip", o.clip, "global gradient norm threshold")->check(CLI::PositiveNumber);
  add_seed(tr);
  add_out(tr);
  add_max_len(tr);

  auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
  ev->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  add_max_len(ev);

  auto* disc = app.add_subcommand("discover", "cluster exercises by correlation weight");
  disc->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  disc->add_option("--ground-truth", o.ground_truth, "exercise,concept,difficulty file")->check(CLI::ExistingFile);
  add_out(disc);

  auto* trace = app.add_subcommand("trace", "knowledge state over one student's sequence");
  trace->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  trace->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile);
  trace->add_option("--student", o.student, "0-based student index");
  add_out(trace);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check on a tiny model");
  add_model(gc);
  add_seed(gc);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*disc) return cmd_discover(o);
    if (*trace) return cmd_trace(o);
    if (*gc) return cmd_gradcheck(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
