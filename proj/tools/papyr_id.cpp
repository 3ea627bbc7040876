// papyr-id: command line front end. Exit codes: 0 ok, 1 input error,
// 2 numerical failure.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "CLI11.hpp"
#include "papyrid/binarize.hpp"
#include "papyrid/config.hpp"
#include "papyrid/corpus.hpp"
#include "papyrid/encode.hpp"
#include "papyrid/errors.hpp"
#include "papyrid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace papyrid;

namespace {

struct ScanArgs {
  fs::path dir, manifest, split;
  std::uint64_t split_seed = 0;
  std::string split_mode = "first-two";
};

struct BinarizeArgs {
  fs::path manifest, out_dir, mask_dir;
  std::string method = "su";
  int su_window = 9, su_min_hc = 9, sauvola_window = 31;
  double sauvola_k = 0.2;
  int jobs = 1;
};

struct FeaturesArgs {
  fs::path manifest, masks, out_dir;
  std::string mode = "rsift", input = "binarized";
  bool upright = false, no_downsample = false;
  int jobs = 1;
};

struct EncodeArgs {
  fs::path manifest, feats, out, split;
  std::size_t codebooks = 5, k = 100, pca_dim = 0, transform_dim = 64;
  double gamma = 1000, alpha = 0.5;
  std::string pool = "gmp", fit_on = "all";
  int jobs = 1;
};

struct RetrieveArgs {
  fs::path enc, report, heatmap_doc, heatmap_scribe;
};

struct ClassifyArgs {
  fs::path enc, split, report, confusion;
  std::string classifier = "svm";
  double svm_c = 1.0;
};

struct RunArgs {
  fs::path config, input_dir, work_dir;
  std::vector<std::string> sets;
  bool force = false;
  int jobs = 0;
};

int do_scan(const ScanArgs& a) {
  const Corpus corpus = scan_corpus(a.dir);
  for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << '\n';
  write_manifest(a.manifest, corpus);
  const fs::path split_file = a.split.empty() ? a.manifest.parent_path() / "split.json" : a.split;
  if (corpus.records.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents in " + a.dir.string());
  try {
    write_split(split_file, make_classification_split(corpus, a.split_seed, parse_split_mode(a.split_mode)));
  } catch (const Error& e) {
    // retrieval still works without a classification split
    if (e.code() != ErrorCode::InsufficientSamples) throw;
    std::cerr << "warning: no split written: " << e.what() << '\n';
  }
  std::cout << corpus.records.size() << " documents, " << corpus.writers().size() << " writers\n";
  return 0;
}

int do_binarize(const BinarizeArgs& a) {
  const Corpus corpus = read_manifest(a.manifest);
  BinarizeOptions opts;
  opts.method = parse_binarization_method(a.method);
  opts.su.window = a.su_window;
  opts.su.min_high_contrast = a.su_min_hc;
  opts.sauvola.window = a.sauvola_window;
  opts.sauvola.k = a.sauvola_k;
  for (const auto& w : binarize_corpus(corpus, opts, a.mask_dir, a.out_dir, a.jobs)) {
    std::cerr << "warning: " << w << '\n';
  }
  return 0;
}

int do_features(const FeaturesArgs& a) {
  const Corpus corpus = read_manifest(a.manifest);
  PipelineConfig cfg;
  cfg.set("features.mode", a.mode);
  cfg.set("features.input", a.input);
  cfg.features.scale_space.upright = a.upright;
  if (a.no_downsample) cfg.features.scale_space.downsample_factor = 1;
  extract_corpus_features(corpus, a.masks, cfg.features, cfg.feature_input, a.out_dir, a.jobs);
  return 0;
}

int do_encode(const EncodeArgs& a) {
  const Corpus corpus = read_manifest(a.manifest);
  EncodeStageOptions opts;
  opts.transform_dim = a.transform_dim;
  auto& e = opts.encoding;
  e.n_codebooks = a.codebooks;
  e.seeds.clear();
  for (std::size_t i = 0; i < a.codebooks; ++i) e.seeds.push_back(i + 1);
  e.k = a.k;
  e.gamma = a.gamma;
  e.power_alpha = a.alpha;
  e.pool = parse_pool_mode(a.pool);
  e.pca_dim = a.pca_dim;
  e.jobs = a.jobs;
  std::vector<std::string> fit_docs;
  if (a.fit_on == "train") {
    if (a.split.empty()) throw Error(ErrorCode::InvalidArgument, "--fit-on train needs --split");
    fit_docs = read_split(a.split).train;
  } else if (a.fit_on != "all") {
    throw Error(ErrorCode::InvalidArgument, "--fit-on must be all or train");
  }
  const auto globals = encode_corpus(corpus, a.feats, opts, fit_docs, a.out);
  std::size_t flagged = 0;
  for (const auto& g : globals) flagged += g.flagged;
  if (flagged) std::cerr << "warning: " << flagged << " documents without descriptors\n";
  return 0;
}

int do_retrieve(const RetrieveArgs& a) {
  const auto globals = read_globals(a.enc / "globals.json");
  const auto r = evaluate_retrieval(globals, a.report, a.heatmap_doc, a.heatmap_scribe);
  std::cout << cv::format("top1 %.1f top5 %.1f top10 %.1f map %.1f\n", r.top1, r.top5, r.top10, r.map);
  return 0;
}

int do_classify(const ClassifyArgs& a) {
  const auto globals = read_globals(a.enc / "globals.json");
  const auto split = read_split(a.split);
  const auto r = evaluate_classifier(globals, split, parse_classifier(a.classifier), a.svm_c, a.report,
                                     a.confusion);
  std::cout << cv::format("top1 %.1f top5 %.1f\n", r.top1, r.top5);
  return 0;
}

int do_run(const RunArgs& a) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (!a.input_dir.empty()) cfg.input_dir = a.input_dir;
  if (!a.work_dir.empty()) cfg.work_dir = a.work_dir;
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.jobs > 0) cfg.jobs = a.jobs;
  const RunResult r = run_pipeline(cfg, RunOptions{a.force, {}});
  for (const auto& s : r.stages) {
    std::cout << s.name << (s.skipped ? " skipped" : cv::format(" %.2f s", s.seconds)) << '\n';
  }
  std::cout << "reports: " << r.reports_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Writer retrieval and classification for papyrus document images"};
  app.require_subcommand(1);

  ScanArgs scan;
  auto* s = app.add_subcommand("scan", "list a corpus directory into a manifest");
  s->add_option("dir", scan.dir, "image directory")->required();
  s->add_option("--manifest", scan.manifest, "output manifest CSV")->required();
  s->add_option("--split", scan.split, "output split JSON (default: split.json next to the manifest)");
  s->add_option("--split-seed", scan.split_seed);
  s->add_option("--split-mode", scan.split_mode, "first-two|random");

  BinarizeArgs bin;
  auto* b = app.add_subcommand("binarize", "write ink masks");
  b->add_option("manifest", bin.manifest)->required();
  b->add_option("--method", bin.method, "su|otsu|sauvola|external");
  b->add_option("--out-dir", bin.out_dir)->required();
  b->add_option("--mask-dir", bin.mask_dir, "precomputed masks for --method external");
  b->add_option("--su-window", bin.su_window);
  b->add_option("--su-min-hc", bin.su_min_hc);
  b->add_option("--sauvola-window", bin.sauvola_window);
  b->add_option("--sauvola-k", bin.sauvola_k);
  b->add_option("--jobs", bin.jobs);

  FeaturesArgs feat;
  auto* f = app.add_subcommand("features", "extract local descriptors");
  f->add_option("manifest", feat.manifest)->required();
  f->add_option("--masks", feat.masks, "mask directory (omit for plain sift on gray images)");
  f->add_option("--mode", feat.mode, "sift|rsift");
  f->add_option("--input", feat.input, "binarized|gray");
  f->add_option("--out-dir", feat.out_dir)->required();
  f->add_flag("--upright", feat.upright);
  f->add_flag("--no-downsample", feat.no_downsample);
  f->add_option("--jobs", feat.jobs);

  EncodeArgs enc;
  auto* e = app.add_subcommand("encode", "fit the encoder and write global descriptors");
  e->add_option("manifest", enc.manifest)->required();
  e->add_option("--feats", enc.feats)->required();
  e->add_option("--out", enc.out)->required();
  e->add_option("--codebooks", enc.codebooks);
  e->add_option("--k", enc.k);
  e->add_option("--gamma", enc.gamma);
  e->add_option("--alpha", enc.alpha);
  e->add_option("--pool", enc.pool, "gmp|sum");
  e->add_option("--pca-dim", enc.pca_dim, "0: automatic");
  e->add_option("--transform-dim", enc.transform_dim);
  e->add_option("--fit-on", enc.fit_on, "all|train");
  e->add_option("--split", enc.split, "split JSON for --fit-on train");
  e->add_option("--jobs", enc.jobs);

  RetrieveArgs ret;
  auto* r = app.add_subcommand("retrieve", "leave-one-out retrieval evaluation");
  r->add_option("--enc", ret.enc)->required();
  r->add_option("--report", ret.report);
  r->add_option("--heatmap-doc", ret.heatmap_doc);
  r->add_option("--heatmap-scribe", ret.heatmap_scribe);

  ClassifyArgs cls;
  auto* c = app.add_subcommand("classify", "writer classification on a train/test split");
  c->add_option("--enc", cls.enc)->required();
  c->add_option("--split", cls.split)->required();
  c->add_option("--classifier", cls.classifier, "nn|svm");
  c->add_option("--svm-c", cls.svm_c);
  c->add_option("--report", cls.report);
  c->add_option("--confusion", cls.confusion);

  RunArgs run;
  auto* p = app.add_subcommand("run", "full cached pipeline from a config file");
  p->add_option("--config", run.config);
  p->add_option("--input-dir", run.input_dir);
  p->add_option("--work-dir", run.work_dir);
  p->add_option("--set", run.sets, "key=value override, repeatable");
  p->add_flag("--force", run.force);
  p->add_option("--jobs", run.jobs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s) return do_scan(scan);
    if (*b) return do_binarize(bin);
    if (*f) return do_features(feat);
    if (*e) return do_encode(enc);
    if (*r) return do_retrieve(ret);
    if (*c) return do_classify(cls);
    if (*p) return do_run(run);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return is_numerical(err.code()) ? 2 : 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
