// Synthetic student generator with ground-truth concept labels.
//
// Item-response model with learning: each student has a standard-normal
// ability per concept, each exercise a standard-normal difficulty. Responses
// are Bernoulli(guess + (1 - guess) sigmoid(ability - difficulty)); after each
// attempt the ability on that exercise's concept grows by a fixed increment.
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kt/diffcore.hpp"
#include "kt/encoding.hpp"

namespace kt {

struct SynthConfig {
  int train_students = 400;
  int test_students = 400;
  int exercises = 50;
  int concepts = 5;
  int sequence_length = 50;
  double guess = 0.25;
  double learning_increment = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (train_students < 1 || test_students < 1 || exercises < 1 || concepts < 1 || sequence_length < 1) {
      throw std::invalid_argument("synth: counts must be positive");
    }
    if (concepts > exercises) throw std::invalid_argument("synth: more concepts than exercises");
    if (!(guess >= 0.0 && guess <= 1.0)) throw std::invalid_argument("synth: guess must lie in [0,1]");
  }
};

struct GroundTruth {
  std::vector<int> concept_of;     // indexed by exercise - 1, values in [1, concepts]
  std::vector<double> difficulty;  // indexed by exercise - 1
};

struct SynthDataset {
  std::vector<StudentSequence> train;
  std::vector<StudentSequence> test;
  GroundTruth truth;
  std::vector<int> order;  // exercise presentation order shared by all students
};

inline double response_prob(double ability, double difficulty, double guess) {
  if (!(guess >= 0.0 && guess <= 1.0)) throw std::invalid_argument("guess must lie in [0,1]");
  return guess + (1.0 - guess) * sigmoid(ability - difficulty);
}

namespace detail {

inline StudentSequence simulate_student(const SynthConfig& cfg, const GroundTruth& truth,
                                        const std::vector<int>& order, std::uint64_t split_tag,
                                        std::uint64_t student) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(split_tag), static_cast<std::uint32_t>(student)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> ability(static_cast<std::size_t>(cfg.concepts));
  for (auto& a : ability) a = normal(rng);

  StudentSequence s;
  s.student_id = (split_tag == 0 ? "train-" : "test-") + std::to_string(student);
  for (int t = 0; t < cfg.sequence_length; ++t) {
    const int e = order[static_cast<std::size_t>(t) % order.size()];
    const auto c = static_cast<std::size_t>(truth.concept_of[static_cast<std::size_t>(e - 1)] - 1);
    const double p = response_prob(ability[c], truth.difficulty[static_cast<std::size_t>(e - 1)], cfg.guess);
    const int r = uniform(rng) < p ? 1 : 0;
    s.interactions.push_back({e, r});
    ability[c] += cfg.learning_increment;
  }
  return s;
}

}  // namespace detail

inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto E = static_cast<std::size_t>(cfg.exercises);

  SynthDataset out;
  // Round-robin assignment guarantees every concept is used, then shuffle.
  out.truth.concept_of.resize(E);
  for (std::size_t e = 0; e < E; ++e) out.truth.concept_of[e] = static_cast<int>(e % static_cast<std::size_t>(cfg.concepts)) + 1;
  std::shuffle(out.truth.concept_of.begin(), out.truth.concept_of.end(), rng);
  out.truth.difficulty.resize(E);
  for (auto& d : out.truth.difficulty) d = normal(rng);
  out.order.resize(E);
  for (std::size_t e = 0; e < E; ++e) out.order[e] = static_cast<int>(e) + 1;
  std::shuffle(out.order.begin(), out.order.end(), rng);

  for (int s = 0; s < cfg.train_students; ++s) {
    out.train.push_back(detail::simulate_student(cfg, out.truth, out.order, 0, static_cast<std::uint64_t>(s)));
  }
  for (int s = 0; s < cfg.test_students; ++s) {
    out.test.push_back(detail::simulate_student(cfg, out.truth, out.order, 1, static_cast<std::uint64_t>(s)));
  }
  return out;
}

inline std::string ground_truth_csv(const GroundTruth& truth) {
  std::ostringstream os;
  os << "exercise,concept,difficulty\n";
  os.precision(17);
  for (std::size_t e = 0; e < truth.concept_of.size(); ++e) {
    os << (e + 1) << ',' << truth.concept_of[e] << ',' << truth.difficulty[e] << '\n';
  }
  return os.str();
}

/// Parses the ground-truth file into an (original exercise tag -> concept) list.
inline std::vector<std::pair<long long, int>> parse_ground_truth_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::vector<std::pair<long long, int>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    if (c1 == std::string_view::npos) throw ParseError(i + 1, "expected exercise,concept[,difficulty]");
    const auto c2 = line.find(',', c1 + 1);
    const auto exercise = detail::parse_int(line.substr(0, c1), i + 1);
    const auto concept_id = detail::parse_int(line.substr(c1 + 1, c2 == std::string_view::npos ? std::string_view::npos : c2 - c1 - 1), i + 1);
    out.emplace_back(exercise, static_cast<int>(concept_id));
  }
  return out;
}

}  // namespace kt
