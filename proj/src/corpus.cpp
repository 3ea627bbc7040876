#include "papyrid/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "papyrid/errors.hpp"
#include "papyrid/image_io.hpp"

namespace fs = std::filesystem;

namespace papyrid {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Paths in the manifest may contain commas; quote those fields.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::vector<std::string> Corpus::writers() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.writer).second) out.push_back(r.writer);
  }
  return out;
}

const DocumentRecord& Corpus::find(std::string_view doc_id) const {
  for (const auto& r : records) {
    if (r.doc_id == doc_id) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown doc_id " + std::string(doc_id));
}

std::string parse_writer_label(std::string_view filename) {
  std::string stem = fs::path(std::string(filename)).stem().string();
  const auto pos = stem.rfind('_');
  if (pos == std::string::npos || pos == 0 || pos + 1 == stem.size()) {
    throw Error(ErrorCode::MalformedName, "expected <label>_<digits>: " + std::string(filename));
  }
  const bool digits = std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(pos) + 1, stem.end(),
                                  [](unsigned char c) { return std::isdigit(c) != 0; });
  if (!digits) {
    throw Error(ErrorCode::MalformedName, "suffix is not numeric: " + std::string(filename));
  }
  return stem.substr(0, pos);
}

bool is_image_file(const fs::path& path) {
  static const std::set<std::string> kExt = {".png", ".jpg", ".jpeg", ".tif", ".tiff"};
  return kExt.count(lower(path.extension().string())) != 0;
}

Corpus make_corpus(std::vector<DocumentRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const DocumentRecord& a, const DocumentRecord& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].doc_id == records[i - 1].doc_id) {
      throw Error(ErrorCode::DuplicateDocId, records[i].doc_id);
    }
  }
  for (const auto& r : records) {
    if (r.writer.empty()) throw Error(ErrorCode::MalformedName, "empty writer for " + r.doc_id);
  }
  Corpus c;
  c.records = std::move(records);
  return c;
}

Corpus scan_corpus(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  }
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());

  std::vector<DocumentRecord> records;
  std::vector<std::string> warnings;
  for (const auto& p : entries) {
    const std::string name = p.filename().string();
    if (!is_image_file(p)) {
      warnings.push_back("skipped non-image file " + name);
      continue;
    }
    DocumentRecord r;
    try {
      r.writer = parse_writer_label(name);
    } catch (const Error& e) {
      warnings.push_back("skipped " + name + ": " + e.what());
      continue;
    }
    r.path = p;
    r.doc_id = p.stem().string();
    const cv::Size size = probe_size(p);
    r.width = size.width;
    r.height = size.height;
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorCode::EmptyCorpus, "no usable images in " + dir.string());
  Corpus c = make_corpus(std::move(records));
  c.warnings = std::move(warnings);
  return c;
}

SplitMode parse_split_mode(std::string_view text) {
  if (text == "first-two") return SplitMode::FirstTwo;
  if (text == "random") return SplitMode::Random;
  throw Error(ErrorCode::InvalidArgument, "unknown split mode " + std::string(text));
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::FirstTwo ? "first-two" : "random";
}

ClassificationSplit make_classification_split(const Corpus& corpus, std::uint64_t seed,
                                              SplitMode mode) {
  std::map<std::string, std::vector<std::string>> by_writer;
  for (const auto& r : corpus.records) by_writer[r.writer].push_back(r.doc_id);
  for (const auto& [writer, docs] : by_writer) {
    if (docs.size() < 3) {
      throw Error(ErrorCode::InsufficientSamples,
                  "writer " + writer + " has " + std::to_string(docs.size()) +
                      " documents, need at least 3");
    }
  }

  std::set<std::string> train;
  std::mt19937_64 rng(seed);
  for (const auto& [writer, docs] : by_writer) {
    std::vector<std::string> order = docs;  // already lexicographic
    if (mode == SplitMode::Random) {
      // Fisher-Yates with raw engine output; std::shuffle and the standard
      // distributions are not specified bit-for-bit across library vendors.
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
      }
    }
    train.insert(order[0]);
    train.insert(order[1]);
  }

  ClassificationSplit split;
  split.seed = seed;
  split.mode = mode;
  for (const auto& r : corpus.records) {
    (train.count(r.doc_id) ? split.train : split.test).push_back(r.doc_id);
  }
  return split;
}

void write_manifest(const fs::path& file, const Corpus& corpus) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "doc_id,writer,path,width,height\n";
  for (const auto& r : corpus.records) {
    out << csv_field(r.doc_id) << ',' << csv_field(r.writer) << ',' << csv_field(r.path.string())
        << ',' << r.width << ',' << r.height << '\n';
  }
}

Corpus read_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read manifest " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != "doc_id,writer,path,width,height") {
    throw Error(ErrorCode::IoError, "bad manifest header in " + file.string());
  }
  std::vector<DocumentRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw Error(ErrorCode::IoError, "bad manifest row: " + line);
    DocumentRecord r;
    r.doc_id = f[0];
    r.writer = f[1];
    r.path = f[2];
    r.width = std::stoi(f[3]);
    r.height = std::stoi(f[4]);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorCode::EmptyCorpus, "empty manifest " + file.string());
  return make_corpus(std::move(records));
}

void write_split(const fs::path& file, const ClassificationSplit& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["mode"] = std::string(to_string(split.mode));
  j["train"] = split.train;
  j["test"] = split.test;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

ClassificationSplit read_split(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read split " + file.string());
  try {
    const auto j = nlohmann::json::parse(in);
    ClassificationSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mode = parse_split_mode(j.at("mode").get<std::string>());
    s.train = j.at("train").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "bad split file " + file.string() + ": " + e.what());
  }
}

}  // namespace papyrid
