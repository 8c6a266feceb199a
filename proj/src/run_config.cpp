#include "tsformer/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace tsformer {

namespace pt = boost::property_tree;

std::string_view to_string(DataSource s) { return s == DataSource::simulate ? "simulate" : "csv"; }

DataSource parse_data_source(std::string_view s) {
  if (s == "simulate") return DataSource::simulate;
  if (s == "csv") return DataSource::csv;
  throw ConfigError("unknown data source '" + std::string(s) + "' (expected simulate or csv)");
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad boolean '" + std::string(text) + "' for " + std::string(key));
}

std::string join_units(const std::vector<std::size_t>& units) {
  std::string s;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(units[i]);
  }
  return s;
}

std::vector<std::size_t> parse_units(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<std::size_t>(key, text.substr(0, comma)));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "run.task", "run.source", "run.csv_path", "run.points", "run.method", "run.bootstrap_count",
      "run.bootstrap_seed", "run.init_seed", "run.output_dir",
      "model.length", "model.classes", "model.num_heads", "model.head_size", "model.num_blocks",
      "model.ff_dim", "model.mlp_units", "model.dropout", "model.mlp_dropout",
      "model.layernorm_epsilon", "model.norm_placement",
      "train.epochs", "train.batch_size", "train.learning_rate", "train.adam_beta1",
      "train.adam_beta2", "train.adam_epsilon", "train.seed", "train.early_stop_patience",
      "ou.theta", "ou.mu", "ou.sigma", "ou.dt", "ou.h0", "ou.seed",
      "split.train_fraction", "split.validation_fraction",
      "embedding.d", "embedding.use_positional"};
  return k;
}

std::string RunConfig::get(std::string_view key) const {
  if (key == "run.task") return std::string(to_string(task));
  if (key == "run.source") return std::string(to_string(source));
  if (key == "run.csv_path") return csv_path.string();
  if (key == "run.points") return std::to_string(points);
  if (key == "run.method") return std::to_string(static_cast<int>(method));
  if (key == "run.bootstrap_count") return std::to_string(bootstrap_count);
  if (key == "run.bootstrap_seed") return std::to_string(bootstrap_seed);
  if (key == "run.init_seed") return std::to_string(init_seed);
  if (key == "run.output_dir") return output_dir.string();
  if (key == "model.length") return std::to_string(model.length);
  if (key == "model.classes") return std::to_string(model.classes);
  if (key == "model.num_heads") return std::to_string(model.num_heads);
  if (key == "model.head_size") return std::to_string(model.head_size);
  if (key == "model.num_blocks") return std::to_string(model.num_blocks);
  if (key == "model.ff_dim") return std::to_string(model.ff_dim);
  if (key == "model.mlp_units") return join_units(model.mlp_units);
  if (key == "model.dropout") return format_real(model.dropout);
  if (key == "model.mlp_dropout") return format_real(model.mlp_dropout);
  if (key == "model.layernorm_epsilon") return format_real(model.layernorm_epsilon);
  if (key == "model.norm_placement") return std::string(to_string(model.norm_placement));
  if (key == "train.epochs") return std::to_string(train.epochs);
  if (key == "train.batch_size") return std::to_string(train.batch_size);
  if (key == "train.learning_rate") return format_real(train.learning_rate);
  if (key == "train.adam_beta1") return format_real(train.adam_beta1);
  if (key == "train.adam_beta2") return format_real(train.adam_beta2);
  if (key == "train.adam_epsilon") return format_real(train.adam_epsilon);
  if (key == "train.seed") return std::to_string(train.seed);
  if (key == "train.early_stop_patience") {
    return train.early_stop_patience ? std::to_string(*train.early_stop_patience) : std::string();
  }
  if (key == "ou.theta") return format_real(ou.theta);
  if (key == "ou.mu") return format_real(ou.mu);
  if (key == "ou.sigma") return format_real(ou.sigma);
  if (key == "ou.dt") return format_real(ou.dt);
  if (key == "ou.h0") return format_real(ou.h0);
  if (key == "ou.seed") return std::to_string(ou.seed);
  if (key == "split.train_fraction") return format_real(split.train_fraction);
  if (key == "split.validation_fraction") return format_real(split.validation_fraction);
  if (key == "embedding.d") return std::to_string(embedding.d);
  if (key == "embedding.use_positional") return embedding.use_positional ? "true" : "false";
  throw ConfigError("unknown config key " + std::string(key));
}

void RunConfig::set(std::string_view key, std::string_view v) {
  using U = std::size_t;
  using S = std::uint64_t;
  try {
    if (key == "run.task") task = parse_target(v);
    else if (key == "run.source") source = parse_data_source(v);
    else if (key == "run.csv_path") csv_path = std::string(v);
    else if (key == "run.points") points = parse_number<U>(key, v);
    else if (key == "run.method") {
      const int m = parse_number<int>(key, v);
      if (m < 1 || m > 4) throw ConfigError("run.method must be 1, 2, 3 or 4");
      method = static_cast<WindowMethod>(m);
    } else if (key == "run.bootstrap_count") bootstrap_count = parse_number<U>(key, v);
    else if (key == "run.bootstrap_seed") bootstrap_seed = parse_number<S>(key, v);
    else if (key == "run.init_seed") init_seed = parse_number<S>(key, v);
    else if (key == "run.output_dir") output_dir = std::string(v);
    else if (key == "model.length") model.length = parse_number<U>(key, v);
    else if (key == "model.classes") model.classes = parse_number<U>(key, v);
    else if (key == "model.num_heads") model.num_heads = parse_number<U>(key, v);
    else if (key == "model.head_size") model.head_size = parse_number<U>(key, v);
    else if (key == "model.num_blocks") model.num_blocks = parse_number<U>(key, v);
    else if (key == "model.ff_dim") model.ff_dim = parse_number<U>(key, v);
    else if (key == "model.mlp_units") model.mlp_units = parse_units(key, v);
    else if (key == "model.dropout") model.dropout = parse_number<double>(key, v);
    else if (key == "model.mlp_dropout") model.mlp_dropout = parse_number<double>(key, v);
    else if (key == "model.layernorm_epsilon") model.layernorm_epsilon = parse_number<double>(key, v);
    else if (key == "model.norm_placement") model.norm_placement = parse_norm_placement(v);
    else if (key == "train.epochs") train.epochs = parse_number<U>(key, v);
    else if (key == "train.batch_size") train.batch_size = parse_number<U>(key, v);
    else if (key == "train.learning_rate") train.learning_rate = parse_number<double>(key, v);
    else if (key == "train.adam_beta1") train.adam_beta1 = parse_number<double>(key, v);
    else if (key == "train.adam_beta2") train.adam_beta2 = parse_number<double>(key, v);
    else if (key == "train.adam_epsilon") train.adam_epsilon = parse_number<double>(key, v);
    else if (key == "train.seed") train.seed = parse_number<S>(key, v);
    else if (key == "train.early_stop_patience") {
      if (v.empty()) train.early_stop_patience.reset();
      else train.early_stop_patience = parse_number<U>(key, v);
    } else if (key == "ou.theta") ou.theta = parse_number<double>(key, v);
    else if (key == "ou.mu") ou.mu = parse_number<double>(key, v);
    else if (key == "ou.sigma") ou.sigma = parse_number<double>(key, v);
    else if (key == "ou.dt") ou.dt = parse_number<double>(key, v);
    else if (key == "ou.h0") ou.h0 = parse_number<double>(key, v);
    else if (key == "ou.seed") ou.seed = parse_number<S>(key, v);
    else if (key == "split.train_fraction") split.train_fraction = parse_number<double>(key, v);
    else if (key == "split.validation_fraction") split.validation_fraction = parse_number<double>(key, v);
    else if (key == "embedding.d") {
      embedding.d = parse_number<U>(key, v);
      model.dim = embedding.d;
    } else if (key == "embedding.use_positional") embedding.use_positional = parse_bool(key, v);
    else throw ConfigError("unknown config key " + std::string(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void RunConfig::set_seed(std::uint64_t seed) {
  ou.seed = seed;
  train.seed = seed;
  init_seed = seed;
  bootstrap_seed = seed;
}

void RunConfig::validate() const {
  try {
    model.validate();
    train.validate();
    ou.validate();
    split.validate();
    embedding.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (model.dim != embedding.d) throw ConfigError("model width must equal embedding.d");
  if (source == DataSource::simulate && points <= model.length) {
    throw ConfigError("run.points must exceed model.length");
  }
  if (source == DataSource::csv) {
    if (csv_path.empty()) throw ConfigError("run.csv_path is required for a csv source");
    if (!std::filesystem::exists(csv_path)) {
      throw ConfigError("csv file not found: " + csv_path.string());
    }
  }
}

WindowOptions RunConfig::window_options() const {
  WindowOptions w;
  w.length = model.length;
  w.method = method;
  w.target = task;
  w.bootstrap_count = bootstrap_count;
  w.bootstrap_seed = bootstrap_seed;
  return w;
}

void RunConfig::write_ini(std::ostream& out) const {
  pt::ptree tree;
  for (const std::string& key : keys()) tree.put(pt::ptree::path_type(key, '.'), get(key));
  pt::write_ini(out, tree);
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ini(out);
}

RunConfig RunConfig::read_ini(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside a section");
    }
    for (const auto& [name, value] : body) c.set(section + "." + name, value.data());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return read_ini(in);
}

}  // namespace tsformer
