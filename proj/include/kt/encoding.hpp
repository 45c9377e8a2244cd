// Exercise/response encodings, padding and masking, the triplet interchange
// format, and deterministic dataset splits.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kt {

/// One answered exercise. Tags are 1-based.
struct Interaction {
  int exercise = 0;
  int response = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct StudentSequence {
  std::string student_id;
  std::vector<Interaction> interactions;

  std::size_t size() const noexcept { return interactions.size(); }
  friend bool operator==(const StudentSequence&, const StudentSequence&) = default;
};

/// Position of the exercise in the key-side embedding (one-hot index).
inline int encode_key_index(int q, int num_exercises) {
  if (q < 1 || q > num_exercises) {
    throw std::out_of_range("exercise tag " + std::to_string(q) + " outside [1, " +
                            std::to_string(num_exercises) + "]");
  }
  return q;
}

/// Position of the (exercise, response) pair in the value-side embedding: q + r*Q.
inline int encode_value_index(int q, int r, int num_exercises) {
  encode_key_index(q, num_exercises);
  if (r != 0 && r != 1) throw std::invalid_argument("response must be 0 or 1, got " + std::to_string(r));
  return q + r * num_exercises;
}

/// Index 0 marks padding in both key and value rows.
inline constexpr int kNullIndex = 0;

/// One fixed-length row of a padded batch. The mask is true on exactly the
/// original-length prefix.
struct PaddedRow {
  std::vector<int> keys;
  std::vector<int> values;
  std::vector<std::uint8_t> mask;
  int num_exercises = 0;

  std::size_t length() const noexcept { return keys.size(); }
  bool valid(std::size_t t) const noexcept { return t < mask.size() && mask[t]; }
  int response(std::size_t t) const noexcept { return values[t] > num_exercises ? 1 : 0; }
  std::size_t valid_length() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
};

using PaddedBatch = std::vector<PaddedRow>;

/// Splits a sequence into chunks of at most max_len, padding the last chunk.
inline std::vector<PaddedRow> pad_sequence(const StudentSequence& seq, int num_exercises,
                                           std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("pad_sequence: max_len must be >= 1");
  if (seq.interactions.empty()) throw std::invalid_argument("pad_sequence: empty sequence");
  std::vector<PaddedRow> rows;
  for (std::size_t start = 0; start < seq.size(); start += max_len) {
    PaddedRow row;
    row.num_exercises = num_exercises;
    row.keys.assign(max_len, kNullIndex);
    row.values.assign(max_len, kNullIndex);
    row.mask.assign(max_len, 0);
    const std::size_t n = std::min(max_len, seq.size() - start);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& x = seq.interactions[start + t];
      row.keys[t] = encode_key_index(x.exercise, num_exercises);
      row.values[t] = encode_value_index(x.exercise, x.response, num_exercises);
      row.mask[t] = 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline PaddedBatch pad_dataset(const std::vector<StudentSequence>& seqs, int num_exercises,
                               std::size_t max_len) {
  PaddedBatch out;
  for (const auto& s : seqs) {
    auto rows = pad_sequence(s, num_exercises, max_len);
    out.insert(out.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  return out;
}

/// Recovers the interactions of the valid prefix.
inline std::vector<Interaction> unpad(const PaddedRow& row) {
  std::vector<Interaction> out;
  for (std::size_t t = 0; t < row.length() && row.valid(t); ++t) {
    out.push_back({row.keys[t], row.response(t)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct DatasetSplit {
  std::vector<StudentSequence> train;
  std::vector<StudentSequence> valid;
  std::vector<StudentSequence> test;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

/// Whole-sequence split of a training set into (train, valid).
inline std::pair<std::vector<StudentSequence>, std::vector<StudentSequence>> split_train_valid(
    const std::vector<StudentSequence>& seqs, double valid_fraction, std::uint64_t seed) {
  if (seqs.size() < 2) throw std::invalid_argument("split_train_valid: need at least 2 sequences");
  const auto idx = shuffled_indices(seqs.size(), seed);
  auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(seqs.size())));
  n_valid = std::clamp<std::size_t>(n_valid, 1, seqs.size() - 1);
  std::vector<StudentSequence> train, valid;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_valid ? valid : train).push_back(seqs[idx[i]]);
  }
  return {std::move(train), std::move(valid)};
}

inline DatasetSplit split_dataset(const std::vector<StudentSequence>& seqs, double test_fraction,
                                  double valid_fraction_of_train, std::uint64_t seed) {
  if (seqs.size() < 5) throw std::invalid_argument("split_dataset: need at least 5 sequences");
  const auto idx = shuffled_indices(seqs.size(), seed);
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(seqs.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, seqs.size() - 2);
  DatasetSplit split;
  std::vector<StudentSequence> rest;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_test ? split.test : rest).push_back(seqs[idx[i]]);
  }
  auto [train, valid] = split_train_valid(rest, valid_fraction_of_train, seed ^ 0x9e3779b97f4a7c15ULL);
  split.train = std::move(train);
  split.valid = std::move(valid);
  return split;
}

// ---------------------------------------------------------------------------
// Triplet text format

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline long long parse_int(std::string_view token, std::size_t line) {
  token = trim(token);
  long long v = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(line, "non-integer token '" + std::string(token) + "'");
  }
  return v;
}

inline std::vector<long long> parse_int_list(std::string_view text, std::size_t line) {
  std::vector<long long> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(parse_int(text.substr(pos, comma - pos), line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

/// Parses triplet records keeping the original exercise tags.
inline std::vector<StudentSequence> parse_triplet_records(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::vector<StudentSequence> out;
  for (std::size_t i = 0; i < lines.size(); i += 3) {
    const std::size_t count_line = i + 1;
    const auto n = detail::parse_int(lines[i], count_line);
    if (n < 1) throw ParseError(count_line, "interaction count must be positive");
    if (i + 2 >= lines.size()) throw ParseError(lines.size() + 1, "truncated record");
    const auto tags = detail::parse_int_list(lines[i + 1], count_line + 1);
    const auto responses = detail::parse_int_list(lines[i + 2], count_line + 2);
    if (tags.size() != static_cast<std::size_t>(n)) {
      throw ParseError(count_line + 1, "expected " + std::to_string(n) + " exercise tags, found " +
                                           std::to_string(tags.size()));
    }
    if (responses.size() != static_cast<std::size_t>(n)) {
      throw ParseError(count_line + 2, "expected " + std::to_string(n) + " responses, found " +
                                           std::to_string(responses.size()));
    }
    StudentSequence seq;
    seq.student_id = std::to_string(out.size());
    for (std::size_t t = 0; t < tags.size(); ++t) {
      if (responses[t] != 0 && responses[t] != 1) {
        throw ParseError(count_line + 2, "response " + std::to_string(responses[t]) + " not in {0,1}");
      }
      seq.interactions.push_back({static_cast<int>(tags[t]), static_cast<int>(responses[t])});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

/// Maps original exercise tags onto dense ids 1..Q in ascending tag order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<long long> tags) : tags_(std::move(tags)) {
    std::sort(tags_.begin(), tags_.end());
    tags_.erase(std::unique(tags_.begin(), tags_.end()), tags_.end());
    for (std::size_t i = 0; i < tags_.size(); ++i) dense_[tags_[i]] = static_cast<int>(i + 1);
  }

  static Vocabulary build(const std::vector<StudentSequence>& seqs) {
    std::vector<long long> tags;
    for (const auto& s : seqs)
      for (const auto& x : s.interactions) tags.push_back(x.exercise);
    return Vocabulary(std::move(tags));
  }

  int size() const noexcept { return static_cast<int>(tags_.size()); }

  int dense_id(long long tag) const {
    auto it = dense_.find(tag);
    if (it == dense_.end()) throw std::out_of_range("exercise tag " + std::to_string(tag) + " not in vocabulary");
    return it->second;
  }

  long long original_tag(int dense) const { return tags_.at(static_cast<std::size_t>(dense - 1)); }
  const std::vector<long long>& tags() const noexcept { return tags_; }

  std::vector<StudentSequence> remap(const std::vector<StudentSequence>& seqs) const {
    auto out = seqs;
    for (auto& s : out)
      for (auto& x : s.interactions) x.exercise = dense_id(x.exercise);
    return out;
  }

  /// Two-column text: original tag, dense id.
  std::string to_text() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < tags_.size(); ++i) os << tags_[i] << ',' << (i + 1) << '\n';
    return os.str();
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tags_ == b.tags_; }

 private:
  std::vector<long long> tags_;
  std::map<long long, int> dense_;
};

struct TripletDataset {
  std::vector<StudentSequence> sequences;  // dense exercise ids
  Vocabulary vocabulary;
};

inline TripletDataset parse_triplet_format(std::string_view text) {
  auto raw = parse_triplet_records(text);
  auto vocab = Vocabulary::build(raw);
  return {vocab.remap(raw), std::move(vocab)};
}

inline std::string write_triplet_format(const std::vector<StudentSequence>& seqs) {
  std::ostringstream os;
  for (const auto& s : seqs) {
    os << s.size() << '\n';
    for (std::size_t t = 0; t < s.size(); ++t) os << (t ? "," : "") << s.interactions[t].exercise;
    os << '\n';
    for (std::size_t t = 0; t < s.size(); ++t) os << (t ? "," : "") << s.interactions[t].response;
    os << '\n';
  }
  return os.str();
}

inline std::size_t count_records(const std::vector<StudentSequence>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  return n;
}

}  // namespace kt
