#include "papyrid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "papyrid/descriptor_cache.hpp"
#include "papyrid/errors.hpp"
#include "papyrid/image_io.hpp"

namespace papyrid {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<std::string> binarize_corpus(const Corpus& corpus, const BinarizeOptions& options,
                                         const fs::path& mask_dir, const fs::path& out_dir,
                                         int jobs) {
  if (options.method == BinarizationMethod::External && mask_dir.empty()) {
    throw Error(ErrorCode::InvalidArgument, "external binarization needs a mask directory");
  }
  fs::create_directories(out_dir);
  std::vector<std::vector<std::string>> warnings(corpus.records.size());
  parallel_for(corpus.records.size(), jobs, [&](std::size_t i) {
    const auto& rec = corpus.records[i];
    BinarizeOptions opts = options;
    if (opts.method == BinarizationMethod::External) opts.external_mask = mask_dir / (rec.doc_id + ".png");
    auto result = binarize(load_grayscale(rec.path), opts);
    write_mask(out_dir / (rec.doc_id + ".png"), result.mask);
    for (auto& w : result.warnings) warnings[i].push_back(rec.doc_id + ": " + w);
  });
  std::vector<std::string> all;
  for (auto& w : warnings) all.insert(all.end(), w.begin(), w.end());
  return all;
}

void extract_corpus_features(const Corpus& corpus, const fs::path& masks_dir,
                             const FeatureOptions& options, FeatureInput input,
                             const fs::path& out_dir, int jobs) {
  FeatureOptions opts = options;
  if (masks_dir.empty()) {
    if (opts.mode == FeatureMode::RSift) {
      throw Error(ErrorCode::InvalidArgument, "rsift needs ink masks");
    }
    opts.require_nonblank = false;
  }
  fs::create_directories(out_dir);
  parallel_for(corpus.records.size(), jobs, [&](std::size_t i) {
    const auto& rec = corpus.records[i];
    cv::Mat gray = load_grayscale(rec.path);
    InkMask mask;
    if (!masks_dir.empty()) {
      mask = read_mask(masks_dir / (rec.doc_id + ".png"));
      if (mask.width() != gray.cols || mask.height() != gray.rows) {
        throw Error(ErrorCode::MaskDimensionMismatch, "mask of " + rec.doc_id + " does not match image");
      }
      if (input == FeatureInput::Binarized) gray = mask.to_png_image();
    }
    const auto descriptors = extract_features(gray, mask, opts);
    write_descriptor_file(out_dir / (rec.doc_id + ".pwid"), to_descriptor_set(descriptors));
  });
}

std::vector<GlobalDescriptor> encode_corpus(const Corpus& corpus, const fs::path& feats_dir,
                                            const EncodeStageOptions& options,
                                            const std::vector<std::string>& fit_docs,
                                            const fs::path& out_dir) {
  const std::size_t n = corpus.records.size();
  std::vector<RowMatrix> raw(n);
  std::vector<std::string> doc_ids(n), writers(n);
  for (std::size_t i = 0; i < n; ++i) {
    doc_ids[i] = corpus.records[i].doc_id;
    writers[i] = corpus.records[i].writer;
    raw[i] = read_descriptor_file(feats_dir / (doc_ids[i] + ".pwid")).descriptors;
  }

  std::vector<bool> fit(n, fit_docs.empty());
  for (const auto& id : fit_docs) {
    const auto it = std::find(doc_ids.begin(), doc_ids.end(), id);
    if (it == doc_ids.end()) throw Error(ErrorCode::InvalidArgument, "unknown document " + id);
    fit[static_cast<std::size_t>(it - doc_ids.begin())] = true;
  }
  std::vector<RowMatrix> fit_raw;
  for (std::size_t i = 0; i < n; ++i) {
    if (fit[i]) fit_raw.push_back(raw[i]);
  }

  const RowMatrix sample = sample_rows(fit_raw, options.transform_max_samples, options.transform_seed);
  const DescriptorTransform transform =
      fit_descriptor_transform(sample, options.transform_dim, options.transform_power);

  std::vector<RowMatrix> mapped(n);
  for (std::size_t i = 0; i < n; ++i) mapped[i] = apply_descriptor_transform_rows(transform, raw[i]);
  std::vector<RowMatrix> fit_mapped;
  for (std::size_t i = 0; i < n; ++i) {
    if (fit[i]) fit_mapped.push_back(mapped[i]);
  }

  const Encoder encoder = fit_encoder(fit_mapped, options.encoding);

  fs::create_directories(out_dir);
  save_descriptor_transform(out_dir / "descriptor_pca.pwmd", transform);
  {
    nlohmann::ordered_json j;
    j["descriptor_transform"] = {{"dim", options.transform_dim},
                                 {"power", options.transform_power},
                                 {"eps", transform.eps},
                                 {"max_samples", options.transform_max_samples},
                                 {"seed", options.transform_seed}};
    j["fit_documents"] = std::count(fit.begin(), fit.end(), true);
    std::ofstream out(out_dir / "config.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / "config.json").string());
    out << j.dump(2) << '\n';
  }
  save_encoder(out_dir, encoder);

  auto globals = encode_documents(encoder, mapped, doc_ids, writers);
  write_globals(out_dir / "globals.json", globals);
  return globals;
}

namespace {

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << text;
}

fs::path csv_beside(const fs::path& png) {
  fs::path csv = png;
  csv.replace_extension(".csv");
  return csv;
}

}  // namespace

RetrievalReport evaluate_retrieval(const std::vector<GlobalDescriptor>& globals,
                                   const fs::path& report, const fs::path& doc_heatmap,
                                   const fs::path& scribe_heatmap) {
  const auto result = leave_one_out(globals);
  if (!report.empty()) write_text(report, retrieval_report_json(result.report));
  if (!doc_heatmap.empty()) {
    export_heatmap(result.distances.values, result.distances.doc_ids, doc_heatmap, csv_beside(doc_heatmap));
  }
  if (!scribe_heatmap.empty()) {
    std::vector<std::string> labels;
    for (const auto& g : globals) labels.push_back(g.writer);
    const auto sim = scribe_similarity(result.distances, labels);
    export_heatmap(sim.values, sim.writers, scribe_heatmap, csv_beside(scribe_heatmap));
  }
  return result.report;
}

ClassificationReport evaluate_classifier(const std::vector<GlobalDescriptor>& globals,
                                         const ClassificationSplit& split, ClassifierKind kind,
                                         double svm_c, const fs::path& report,
                                         const fs::path& confusion) {
  SvmOptions svm;
  svm.c = svm_c;
  const auto result = run_classification(globals, split, kind, svm);
  if (!report.empty()) write_text(report, classification_report_json(result, kind, svm));
  if (!confusion.empty()) write_confusion_csv(confusion, result.confusion);
  return result;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const fs::path& file, std::uint64_t h) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

class RunLog {
 public:
  explicit RunLog(const fs::path& file) : out_(file, std::ios::app) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open log " + file.string());
  }
  void line(const std::string& text) { out_ << '[' << timestamp() << "] " << text << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

std::string keyed_text(const PipelineConfig& config, std::initializer_list<std::string_view> prefixes) {
  std::string text;
  for (const auto& key : config.keys()) {
    for (auto p : prefixes) {
      if (key.rfind(p, 0) == 0) {
        text += key + '=' + config.get(key) + '\n';
        break;
      }
    }
  }
  return text;
}

std::uint64_t combine(std::uint64_t h, std::string_view tag, const std::string& text) {
  h = fnv1a(tag, h);
  h = fnv1a("\n", h);
  return fnv1a(text, h);
}

struct Stage {
  std::string name;
  fs::path dir;
  std::string key;
};

bool stage_done(const Stage& s) {
  std::ifstream in(s.dir / "DONE");
  std::string key;
  return in && std::getline(in, key) && key == s.key;
}

// Runs body into the stage dir unless it is already complete.
StageRecord run_stage(const Stage& s, const PipelineConfig& config, bool force, RunLog& log,
                      const std::function<void()>& body) {
  StageRecord rec{s.name, s.dir, s.key, false, 0};
  if (!force && stage_done(s)) {
    rec.skipped = true;
    log.line("stage " + s.name + " key " + s.key + " up to date, skipped");
    return rec;
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::remove_all(s.dir, ec);
  fs::create_directories(s.dir);
  try {
    body();
  } catch (const Error& e) {
    log.line("stage " + s.name + " failed: " + e.what());
    throw Error(e.code(), "stage " + s.name + ": " + e.detail());
  } catch (const std::exception& e) {
    log.line("stage " + s.name + " failed: " + e.what());
    throw Error(ErrorCode::IoError, "stage " + s.name + ": " + e.what());
  }
  save_config(s.dir / "config.snapshot", config);
  write_text(s.dir / "DONE", s.key + '\n');
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream msg;
  msg << "stage " << s.name << " key " << s.key << " done in " << std::fixed << std::setprecision(3)
      << rec.seconds << " s";
  log.line(msg.str());
  return rec;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(e.code(), "stage config: " + e.detail());
  }

  RunResult result;
  if (!options.cache_root.empty()) {
    result.root = options.cache_root;
  } else if (const char* env = std::getenv("PAPYRID_CACHE"); env && *env) {
    result.root = env;
  } else {
    result.root = config.work_dir;
  }
  fs::create_directories(result.root);
  result.log_file = result.root / "run.log";
  RunLog log(result.log_file);

  const std::string config_text = config.to_text();
  log.line("run start, config hash " + hex64(fnv1a(config_text)));
  {
    std::string seeds = "seeds: encode.seeds=" + config.get("encode.seeds") +
                        " encode.sample_seed=" + config.get("encode.sample_seed") +
                        " transform.seed=" + config.get("transform.seed") +
                        " split.seed=" + config.get("split.seed");
    log.line(seeds);
  }

  // scan
  Corpus corpus;
  ClassificationSplit split;
  std::uint64_t corpus_hash = 0;
  try {
    if (!fs::is_directory(config.input_dir)) {
      throw Error(ErrorCode::IoError, "input_dir " + config.input_dir.string() + " is not a directory");
    }
    const auto t0 = std::chrono::steady_clock::now();
    corpus = scan_corpus(config.input_dir);
    for (const auto& w : corpus.warnings) log.line("scan warning: " + w);
    corpus_hash = fnv1a("corpus");
    for (const auto& r : corpus.records) {
      corpus_hash = fnv1a(r.doc_id + '\n', corpus_hash);
      corpus_hash = hash_file(r.path, corpus_hash);
    }
    split = make_classification_split(corpus, config.split_seed, config.split_mode);
    std::ostringstream msg;
    msg << "stage scan: " << corpus.records.size() << " documents, corpus hash " << hex64(corpus_hash)
        << ", " << std::fixed << std::setprecision(3)
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s";
    log.line(msg.str());
  } catch (const Error& e) {
    log.line(std::string("stage scan failed: ") + e.what());
    throw Error(e.code(), "stage scan: " + e.detail());
  }

  const int jobs = config.jobs;

  // binarize
  fs::path masks_dir;
  std::uint64_t upstream = corpus_hash;
  if (config.binarize) {
    std::uint64_t h = combine(corpus_hash, "binarize", keyed_text(config, {"binarize.", "su.", "sauvola."}));
    if (config.binarization.method == BinarizationMethod::External) {
      for (const auto& r : corpus.records) {
        const fs::path m = config.mask_dir / (r.doc_id + ".png");
        h = fs::exists(m) ? hash_file(m, h) : fnv1a("missing " + r.doc_id, h);
      }
    }
    Stage s{"binarize", result.root / "masks" / hex64(h), hex64(h)};
    masks_dir = s.dir;
    result.stages.push_back(run_stage(s, config, options.force, log, [&] {
      for (const auto& w : binarize_corpus(corpus, config.binarization, config.mask_dir, s.dir, jobs)) {
        log.line("binarize warning: " + w);
      }
    }));
    upstream = h;
  }

  // features
  std::uint64_t feat_hash = combine(upstream, "features", keyed_text(config, {"features."}));
  if (!config.binarize) feat_hash = fnv1a("no-binarization", feat_hash);
  Stage feats{"features", result.root / "feats" / hex64(feat_hash), hex64(feat_hash)};
  result.stages.push_back(run_stage(feats, config, options.force, log, [&] {
    extract_corpus_features(corpus, masks_dir, config.features, config.feature_input, feats.dir, jobs);
  }));

  // encode
  std::string enc_text = keyed_text(config, {"transform.", "encode."});
  if (config.fit_on == FitOn::Train) enc_text += keyed_text(config, {"split."});
  const std::uint64_t enc_hash = combine(feat_hash, "encode", enc_text);
  Stage enc{"encode", result.root / "enc" / hex64(enc_hash), hex64(enc_hash)};
  result.stages.push_back(run_stage(enc, config, options.force, log, [&] {
    EncodeStageOptions eo;
    eo.transform_dim = config.transform_dim;
    eo.transform_power = config.transform_power;
    eo.transform_max_samples = config.transform_max_samples;
    eo.transform_seed = config.transform_seed;
    eo.encoding = config.encoding;
    eo.encoding.jobs = jobs;
    const std::vector<std::string> fit_docs =
        config.fit_on == FitOn::Train ? split.train : std::vector<std::string>{};
    encode_corpus(corpus, feats.dir, eo, fit_docs, enc.dir);
  }));

  // retrieve + classify
  const std::uint64_t rep_hash = combine(enc_hash, "reports", keyed_text(config, {"split.", "classify."}));
  Stage rep{"evaluate", result.root / "reports" / hex64(rep_hash), hex64(rep_hash)};
  result.reports_dir = rep.dir;
  result.stages.push_back(run_stage(rep, config, options.force, log, [&] {
    const auto globals = read_globals(enc.dir / "globals.json");
    const auto report = evaluate_retrieval(globals, rep.dir / "report.json", rep.dir / "doc_heatmap.png",
                                           rep.dir / "scribe_heatmap.png");
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(1) << "retrieval top1 " << report.top1 << " top5 " << report.top5
        << " top10 " << report.top10 << " map " << report.map;
    log.line(msg.str());
    write_split(rep.dir / "split.json", split);
    for (const auto kind : config.classifiers) {
      const std::string tag(to_string(kind));
      const auto cls = evaluate_classifier(globals, split, kind, config.svm_c, rep.dir / ("cls_" + tag + ".json"),
                                           rep.dir / ("conf_" + tag + ".csv"));
      std::ostringstream m;
      m << std::fixed << std::setprecision(1) << "classification " << tag << " top1 " << cls.top1 << " top5 "
        << cls.top5;
      log.line(m.str());
    }
  }));

  log.line("run done, reports in " + rep.dir.string());
  return result;
}

}  // namespace papyrid
