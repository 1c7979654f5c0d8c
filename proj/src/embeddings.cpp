#include "chronotag/embeddings.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "chronotag/errors.hpp"
#include "chronotag/mathcore.hpp"

namespace chronotag {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(std::move(f));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool is_count_header(const std::vector<std::string>& fields) {
  if (fields.size() != 2) return false;
  for (const auto& f : fields) {
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) return false;
  }
  return true;
}

}  // namespace

WordTable read_word_table(std::istream* in, const Vocabulary& vocab, std::size_t dim, const Rng& rng,
                          WordTableOptions options, std::vector<std::string>* warnings) {
  if (dim == 0) throw InvalidArgument("word table dimension must be >= 1");
  WordTable table{Matrix(vocab.size(), dim)};
  std::vector<bool> from_file(vocab.size(), false);

  if (in != nullptr) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(*in, line)) {
      ++line_no;
      auto fields = split_ws(line);
      if (fields.empty()) continue;
      if (line_no == 1 && is_count_header(fields)) continue;
      const std::string& word = fields.front();
      if (fields.size() != dim + 1) {
        throw ParseError(line_no, "embedding for '" + word + "' has " + std::to_string(fields.size() - 1) +
                                      " values, expected " + std::to_string(dim));
      }
      if (!vocab.contains(word)) continue;
      const int id = vocab.id(word);
      auto row = table.vectors.row(static_cast<std::size_t>(id));
      for (std::size_t k = 0; k < dim; ++k) {
        if (!parse_double(fields[k + 1], row[k])) {
          throw ParseError(line_no, "embedding for '" + word + "' has a non-numeric value");
        }
      }
      if (from_file[static_cast<std::size_t>(id)] && warnings != nullptr) {
        warnings->push_back("duplicate embedding for '" + word + "' on line " + std::to_string(line_no) +
                            "; keeping the last one");
      }
      from_file[static_cast<std::size_t>(id)] = true;
    }
  }

  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (static_cast<int>(id) == Vocabulary::kPad) continue;
    if (from_file[id]) continue;
    Rng word_rng = rng.fork(vocab.word(static_cast<int>(id)));
    for (auto& v : table.vectors.row(id)) v = word_rng.normal(0.0, options.oov_stddev);
  }
  for (auto& v : table.vectors.row(Vocabulary::kPad)) v = 0.0;
  return table;
}

WordTable load_word_table(const std::optional<std::filesystem::path>& path, const Vocabulary& vocab,
                          std::size_t dim, const Rng& rng, WordTableOptions options,
                          std::vector<std::string>* warnings) {
  if (!path) return read_word_table(nullptr, vocab, dim, rng, options, warnings);
  std::ifstream in(*path);
  if (!in) throw DataError("cannot open embedding file " + path->string());
  return read_word_table(&in, vocab, dim, rng, options, warnings);
}

std::size_t YearTable::row_of(int year) const {
  if (!range.contains(year)) {
    throw InvalidArgument("year " + std::to_string(year) + " outside year table " + std::to_string(range.min) +
                          "-" + std::to_string(range.max));
  }
  return static_cast<std::size_t>(year - range.min);
}

YearTable init_year_table(int year_min, int year_max, std::size_t dim, Rng& rng) {
  if (year_min > year_max) throw InvalidArgument("init_year_table: year_min > year_max");
  const YearRange range{year_min, year_max};
  return YearTable{range, xavier_init(range.count(), dim, rng)};
}

}  // namespace chronotag
