#include "chronotag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chronotag/errors.hpp"

namespace chronotag {

void validate(const DatedSentence& sentence, const YearRange& range) {
  if (sentence.tokens.empty()) throw DataError("sentence has no tokens");
  if (sentence.tokens.size() != sentence.tags.size()) {
    throw DataError("token/tag length mismatch (" + std::to_string(sentence.tokens.size()) + " tokens, " +
                    std::to_string(sentence.tags.size()) + " tags)");
  }
  if (!range.contains(sentence.year)) {
    throw DataError("year " + std::to_string(sentence.year) + " outside " + std::to_string(range.min) + "-" +
                    std::to_string(range.max));
  }
}

namespace {

DatedSentence parse_record(const std::string& line, std::size_t line_no, const YearRange& range) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");
  DatedSentence s;
  try {
    s.year = j.at("year").get<int>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.tags = j.at("tags").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, std::string("bad field: ") + e.what());
  }
  try {
    validate(s, range);
  } catch (const DataError& e) {
    throw ParseError(line_no, e.what());
  }
  return s;
}

}  // namespace

std::vector<DatedSentence> read_corpus(std::istream& in, const YearRange& range) {
  std::vector<DatedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_record(line, line_no, range));
  }
  return out;
}

std::vector<DatedSentence> load_corpus(const std::filesystem::path& path, const YearRange& range) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return read_corpus(in, range);
}

void write_corpus(std::ostream& out, const std::vector<DatedSentence>& sentences) {
  for (const auto& s : sentences) {
    nlohmann::ordered_json j;
    j["year"] = s.year;
    j["tokens"] = s.tokens;
    j["tags"] = s.tags;
    out << j.dump() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const std::vector<DatedSentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(out, sentences);
}

std::vector<DatedSentence> balanced_sample(const std::vector<DatedSentence>& corpus, std::size_t per_decade,
                                           const YearRange& range, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_decade;
  for (int d = decade_of(range.min); d <= range.max; d += 10) by_decade[d];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (range.contains(corpus[i].year)) by_decade[decade_of(corpus[i].year)].push_back(i);
  }
  std::vector<std::string> short_decades;
  for (const auto& [decade, idx] : by_decade) {
    if (idx.size() < per_decade) {
      short_decades.push_back(decade_label(decade) + " (" + std::to_string(idx.size()) + ")");
    }
  }
  if (!short_decades.empty()) {
    std::string msg = "balanced_sample: fewer than " + std::to_string(per_decade) + " sentences in";
    for (const auto& d : short_decades) msg += " " + d;
    throw DataError(msg);
  }
  std::vector<DatedSentence> out;
  out.reserve(by_decade.size() * per_decade);
  for (auto& [decade, idx] : by_decade) {
    // Partial Fisher-Yates: the first per_decade slots become the sample.
    for (std::size_t i = 0; i < per_decade; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
      out.push_back(corpus[idx[i]]);
    }
  }
  rng.shuffle(std::span<DatedSentence>(out));
  return out;
}

std::vector<DatedSentence> truncate(std::vector<DatedSentence> sentences, std::size_t max_len) {
  if (max_len == 0) throw InvalidArgument("truncate: max_len must be >= 1");
  for (auto& s : sentences) {
    if (s.tokens.size() > max_len) s.tokens.resize(max_len);
    if (s.tags.size() > max_len) s.tags.resize(max_len);
  }
  return sentences;
}

std::size_t split_train_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

CorpusSplit split(std::vector<DatedSentence> sentences, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split: fraction must lie in (0, 1)");
  if (sentences.size() < 2) throw InvalidArgument("split: need at least 2 sentences");
  rng.shuffle(std::span<DatedSentence>(sentences));
  const std::size_t n_train = split_train_count(sentences.size(), fraction);
  CorpusSplit out;
  out.fraction = fraction;
  out.seed = rng.seed();
  out.test.assign(std::make_move_iterator(sentences.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(sentences.end()));
  sentences.resize(n_train);
  out.train = std::move(sentences);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_tsv(const std::filesystem::path& path, const std::vector<std::string>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < items.size(); ++i) out << items[i] << '\t' << i << '\n';
}

std::vector<std::string> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected token<TAB>id");
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad id");
    }
    if (id != items.size()) throw ParseError(line_no, "ids must be dense and ascending");
    items.push_back(line.substr(0, tab));
  }
  return items;
}

}  // namespace

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string word) {
  const int id = static_cast<int>(words_.size());
  if (!ids_.emplace(word, id).second) throw DataError("duplicate vocabulary entry '" + word + "'");
  words_.push_back(std::move(word));
}

Vocabulary Vocabulary::build(const std::vector<DatedSentence>& train, std::size_t max_size) {
  if (train.empty()) throw InvalidArgument("build_vocab: empty training set");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : train)
    for (const auto& t : s.tokens) ++counts[t];
  counts.erase(std::string(kPadToken));
  counts.erase(std::string(kUnkToken));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  Vocabulary v;
  for (auto& [word, count] : ranked) v.add(std::move(word));
  return v;
}

int Vocabulary::id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return ids_.count(std::string(word)) != 0; }

void Vocabulary::save(const std::filesystem::path& path) const { write_tsv(path, words_); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const auto items = read_tsv(path);
  if (items.size() < 2 || items[kPad] != kPadToken || items[kUnk] != kUnkToken) {
    throw DataError(path.string() + ": vocabulary must start with " + std::string(kPadToken) + " and " +
                    std::string(kUnkToken));
  }
  Vocabulary v;
  for (std::size_t i = 2; i < items.size(); ++i) v.add(items[i]);
  return v;
}

TagSet TagSet::build(const std::vector<DatedSentence>& train) {
  if (train.empty()) throw InvalidArgument("build_tagset: empty training set");
  TagSet ts;
  for (const auto& s : train) {
    for (const auto& t : s.tags) {
      if (ts.ids_.emplace(t, static_cast<int>(ts.tags_.size())).second) ts.tags_.push_back(t);
    }
  }
  return ts;
}

int TagSet::id(std::string_view tag) const {
  const auto it = ids_.find(std::string(tag));
  return it == ids_.end() ? kUnknown : it->second;
}

void TagSet::save(const std::filesystem::path& path) const { write_tsv(path, tags_); }

TagSet TagSet::load(const std::filesystem::path& path) {
  TagSet ts;
  ts.tags_ = read_tsv(path);
  for (std::size_t i = 0; i < ts.tags_.size(); ++i) {
    if (!ts.ids_.emplace(ts.tags_[i], static_cast<int>(i)).second) {
      throw DataError(path.string() + ": duplicate tag '" + ts.tags_[i] + "'");
    }
  }
  return ts;
}

EncodedSentence encode(const DatedSentence& sentence, const Vocabulary& vocab, const TagSet& tags) {
  EncodedSentence e;
  e.year = sentence.year;
  e.tokens.reserve(sentence.tokens.size());
  e.tags.reserve(sentence.tags.size());
  for (const auto& t : sentence.tokens) {
    const int id = vocab.id(t);
    e.tokens.push_back(id == Vocabulary::kPad ? Vocabulary::kUnk : id);
  }
  for (const auto& t : sentence.tags) e.tags.push_back(tags.id(t));
  return e;
}

std::vector<EncodedSentence> encode_all(const std::vector<DatedSentence>& sentences, const Vocabulary& vocab,
                                        const TagSet& tags) {
  std::vector<EncodedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode(s, vocab, tags));
  return out;
}

}  // namespace chronotag
