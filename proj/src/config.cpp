#include "papyrid/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "papyrid/errors.hpp"

namespace papyrid {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::InvalidConfig,
              "bad value '" + std::string(value) + "' for key " + std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value)> set;
};

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  using SV = std::string_view;
  static const std::vector<Field> table = {
      {"input_dir", [](const C& c) { return c.input_dir.string(); },
       [](C& c, SV, SV v) { c.input_dir = std::string(v); }},
      {"work_dir", [](const C& c) { return c.work_dir.string(); },
       [](C& c, SV, SV v) { c.work_dir = std::string(v); }},
      {"binarize.method",
       [](const C& c) { return c.binarize ? std::string(to_string(c.binarization.method)) : "none"; },
       [](C& c, SV, SV v) {
         c.binarize = v != "none";
         if (c.binarize) c.binarization.method = parse_binarization_method(v);
       }},
      {"binarize.mask_dir", [](const C& c) { return c.mask_dir.string(); },
       [](C& c, SV, SV v) { c.mask_dir = std::string(v); }},
      {"su.window", [](const C& c) { return fmt_int(c.binarization.su.window); },
       [](C& c, SV k, SV v) { c.binarization.su.window = parse_number<int>(k, v); }},
      {"su.min_high_contrast", [](const C& c) { return fmt_int(c.binarization.su.min_high_contrast); },
       [](C& c, SV k, SV v) { c.binarization.su.min_high_contrast = parse_number<int>(k, v); }},
      {"su.eps", [](const C& c) { return fmt(c.binarization.su.contrast_eps); },
       [](C& c, SV k, SV v) { c.binarization.su.contrast_eps = parse_number<double>(k, v); }},
      {"sauvola.window", [](const C& c) { return fmt_int(c.binarization.sauvola.window); },
       [](C& c, SV k, SV v) { c.binarization.sauvola.window = parse_number<int>(k, v); }},
      {"sauvola.k", [](const C& c) { return fmt(c.binarization.sauvola.k); },
       [](C& c, SV k, SV v) { c.binarization.sauvola.k = parse_number<double>(k, v); }},
      {"sauvola.r", [](const C& c) { return fmt(c.binarization.sauvola.dynamic_range); },
       [](C& c, SV k, SV v) { c.binarization.sauvola.dynamic_range = parse_number<double>(k, v); }},
      {"features.mode", [](const C& c) { return std::string(to_string(c.features.mode)); },
       [](C& c, SV, SV v) { c.features.mode = parse_feature_mode(v); }},
      {"features.input",
       [](const C& c) { return std::string(c.feature_input == FeatureInput::Binarized ? "binarized" : "gray"); },
       [](C& c, SV k, SV v) {
         if (v == "binarized") c.feature_input = FeatureInput::Binarized;
         else if (v == "gray") c.feature_input = FeatureInput::Gray;
         else bad_value(k, v);
       }},
      {"features.upright", [](const C& c) { return std::string(c.features.scale_space.upright ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.features.scale_space.upright = parse_bool(k, v); }},
      {"features.downsample", [](const C& c) { return fmt_int(c.features.scale_space.downsample_factor); },
       [](C& c, SV k, SV v) { c.features.scale_space.downsample_factor = parse_number<int>(k, v); }},
      {"features.contrast_threshold", [](const C& c) { return fmt(c.features.scale_space.contrast_threshold); },
       [](C& c, SV k, SV v) { c.features.scale_space.contrast_threshold = parse_number<double>(k, v); }},
      {"features.edge_threshold", [](const C& c) { return fmt(c.features.scale_space.edge_threshold); },
       [](C& c, SV k, SV v) { c.features.scale_space.edge_threshold = parse_number<double>(k, v); }},
      {"features.require_nonblank", [](const C& c) { return std::string(c.features.require_nonblank ? "true" : "false"); },
       [](C& c, SV k, SV v) { c.features.require_nonblank = parse_bool(k, v); }},
      {"features.blank_patch", [](const C& c) { return fmt_int(c.features.blank_patch_size); },
       [](C& c, SV k, SV v) { c.features.blank_patch_size = parse_number<int>(k, v); }},
      {"transform.dim", [](const C& c) { return fmt_int(c.transform_dim); },
       [](C& c, SV k, SV v) { c.transform_dim = parse_number<std::size_t>(k, v); }},
      {"transform.power", [](const C& c) { return fmt(c.transform_power); },
       [](C& c, SV k, SV v) { c.transform_power = parse_number<double>(k, v); }},
      {"transform.max_samples", [](const C& c) { return fmt_int(c.transform_max_samples); },
       [](C& c, SV k, SV v) { c.transform_max_samples = parse_number<std::size_t>(k, v); }},
      {"transform.seed", [](const C& c) { return fmt_int(c.transform_seed); },
       [](C& c, SV k, SV v) { c.transform_seed = parse_number<std::uint64_t>(k, v); }},
      {"encode.codebooks", [](const C& c) { return fmt_int(c.encoding.n_codebooks); },
       [](C& c, SV k, SV v) { c.encoding.n_codebooks = parse_number<std::size_t>(k, v); }},
      {"encode.k", [](const C& c) { return fmt_int(c.encoding.k); },
       [](C& c, SV k, SV v) { c.encoding.k = parse_number<std::size_t>(k, v); }},
      {"encode.gamma", [](const C& c) { return fmt(c.encoding.gamma); },
       [](C& c, SV k, SV v) { c.encoding.gamma = parse_number<double>(k, v); }},
      {"encode.alpha", [](const C& c) { return fmt(c.encoding.power_alpha); },
       [](C& c, SV k, SV v) { c.encoding.power_alpha = parse_number<double>(k, v); }},
      {"encode.pool", [](const C& c) { return std::string(to_string(c.encoding.pool)); },
       [](C& c, SV, SV v) { c.encoding.pool = parse_pool_mode(v); }},
      {"encode.seeds",
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.encoding.seeds.size(); ++i) {
           if (i) s += ',';
           s += std::to_string(c.encoding.seeds[i]);
         }
         return s;
       },
       [](C& c, SV k, SV v) {
         c.encoding.seeds.clear();
         for (const auto& s : split_list(v)) c.encoding.seeds.push_back(parse_number<std::uint64_t>(k, s));
       }},
      {"encode.pca_dim", [](const C& c) { return fmt_int(c.encoding.pca_dim); },
       [](C& c, SV k, SV v) { c.encoding.pca_dim = parse_number<std::size_t>(k, v); }},
      {"encode.fit_on", [](const C& c) { return std::string(c.fit_on == FitOn::All ? "all" : "train"); },
       [](C& c, SV k, SV v) {
         if (v == "all") c.fit_on = FitOn::All;
         else if (v == "train") c.fit_on = FitOn::Train;
         else bad_value(k, v);
       }},
      {"encode.kmeans_max_iters", [](const C& c) { return fmt_int(c.encoding.kmeans_max_iters); },
       [](C& c, SV k, SV v) { c.encoding.kmeans_max_iters = parse_number<int>(k, v); }},
      {"encode.kmeans_tol", [](const C& c) { return fmt(c.encoding.kmeans_tol); },
       [](C& c, SV k, SV v) { c.encoding.kmeans_tol = parse_number<double>(k, v); }},
      {"encode.kmeans_max_samples", [](const C& c) { return fmt_int(c.encoding.kmeans_max_samples); },
       [](C& c, SV k, SV v) { c.encoding.kmeans_max_samples = parse_number<std::size_t>(k, v); }},
      {"encode.sample_seed", [](const C& c) { return fmt_int(c.encoding.sample_seed); },
       [](C& c, SV k, SV v) { c.encoding.sample_seed = parse_number<std::uint64_t>(k, v); }},
      {"split.mode", [](const C& c) { return std::string(to_string(c.split_mode)); },
       [](C& c, SV k, SV v) {
         try {
           c.split_mode = parse_split_mode(v);
         } catch (const Error&) {
           bad_value(k, v);
         }
       }},
      {"split.seed", [](const C& c) { return fmt_int(c.split_seed); },
       [](C& c, SV k, SV v) { c.split_seed = parse_number<std::uint64_t>(k, v); }},
      {"classify.classifiers",
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.classifiers.size(); ++i) {
           if (i) s += ',';
           s += to_string(c.classifiers[i]);
         }
         return s;
       },
       [](C& c, SV, SV v) {
         c.classifiers.clear();
         for (const auto& s : split_list(v)) {
           if (!s.empty()) c.classifiers.push_back(parse_classifier(s));
         }
       }},
      {"classify.svm_c", [](const C& c) { return fmt(c.svm_c); },
       [](C& c, SV k, SV v) { c.svm_c = parse_number<double>(k, v); }},
      {"jobs", [](const C& c) { return fmt_int(c.jobs); },
       [](C& c, SV k, SV v) { c.jobs = parse_number<int>(k, v); }},
  };
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key " + std::string(key));
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const Field& f = field(key);
  try {
    f.set(*this, key, value);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": " + e.what());
  }
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

std::string PipelineConfig::get(std::string_view key) const { return field(key).get(*this); }

std::string PipelineConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

void PipelineConfig::validate() const {
  try {
    encoding.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (!binarize && features.mode == FeatureMode::RSift) {
    throw Error(ErrorCode::InvalidConfig, "rsift needs a binarization method");
  }
  if (binarize && binarization.method == BinarizationMethod::External && mask_dir.empty()) {
    throw Error(ErrorCode::InvalidConfig, "external binarization needs binarize.mask_dir");
  }
  if (jobs < 1) throw Error(ErrorCode::InvalidConfig, "jobs must be >= 1");
  if (transform_dim < 1 || transform_dim > static_cast<std::size_t>(kSiftDim)) {
    throw Error(ErrorCode::InvalidConfig, "transform.dim must be in [1, 128]");
  }
  if (!(svm_c > 0)) throw Error(ErrorCode::InvalidConfig, "classify.svm_c must be > 0");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::filesystem::path& file, const PipelineConfig& config) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << config.to_text();
}

}  // namespace papyrid
