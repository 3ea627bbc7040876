#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace papyrid {

struct DocumentRecord {
  std::filesystem::path path;
  std::string doc_id;  // filename stem, e.g. "Victor_10"
  std::string writer;  // doc_id without its trailing "_<digits>"
  int width = 0;
  int height = 0;
};

/// Documents in plain byte-lexicographic doc_id order ("Victor_10" < "Victor_2").
struct Corpus {
  std::vector<DocumentRecord> records;
  std::vector<std::string> warnings;

  /// Writers in order of first occurrence.
  std::vector<std::string> writers() const;
  const DocumentRecord& find(std::string_view doc_id) const;
};

enum class SplitMode { FirstTwo, Random };

struct ClassificationSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::FirstTwo;
};

/// "Abraamios_3.jpg" -> "Abraamios"; digits inside the label stay ("Kyros3_1" -> "Kyros3").
std::string parse_writer_label(std::string_view filename);

bool is_image_file(const std::filesystem::path& path);

Corpus scan_corpus(const std::filesystem::path& dir);

/// Sorts records, checks doc_id uniqueness and label consistency.
Corpus make_corpus(std::vector<DocumentRecord> records);

ClassificationSplit make_classification_split(const Corpus& corpus, std::uint64_t seed,
                                              SplitMode mode);

SplitMode parse_split_mode(std::string_view text);
std::string_view to_string(SplitMode mode);

// Manifest CSV: header `doc_id,writer,path,width,height`, LF line endings.
void write_manifest(const std::filesystem::path& file, const Corpus& corpus);
Corpus read_manifest(const std::filesystem::path& file);

void write_split(const std::filesystem::path& file, const ClassificationSplit& split);
ClassificationSplit read_split(const std::filesystem::path& file);

}  // namespace papyrid
