#pragma once

#include "tsformer/dataset.hpp"
#include "tsformer/embedding.hpp"
#include "tsformer/model.hpp"
#include "tsformer/simulator.hpp"
#include "tsformer/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsformer {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DataSource { simulate, csv };

/// Everything one pipeline run needs. Stored as an INI file with sections
/// [run], [model], [train], [ou], [split], [embedding]; every field is
/// addressable as "section.key" for command-line overrides.
///
/// The model width is not a separate key: model.dim always equals
/// embedding.d.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  OUConfig ou;
  SplitConfig split;
  EmbeddingConfig embedding;

  Target task = Target::next_value;
  DataSource source = DataSource::simulate;
  std::filesystem::path csv_path;
  /// Number of simulated observations.
  std::size_t points = 24131;
  WindowMethod method = WindowMethod::overlapping;
  std::size_t bootstrap_count = 0;
  std::uint64_t bootstrap_seed = 0;
  /// Seed for parameter initialisation.
  std::uint64_t init_seed = 0;
  std::filesystem::path output_dir = "run";

  /// All keys in file order.
  static const std::vector<std::string>& keys();

  std::string get(std::string_view key) const;
  /// Throws ConfigError on an unknown key or unparsable value.
  void set(std::string_view key, std::string_view value);
  /// Sets the OU, training, initialisation and bootstrap seeds.
  void set_seed(std::uint64_t seed);

  /// Checks every sub-config and that a csv source names an existing file.
  void validate() const;

  WindowOptions window_options() const;

  void write_ini(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static RunConfig read_ini(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);

  bool operator==(const RunConfig&) const = default;
};

std::string_view to_string(DataSource s);
DataSource parse_data_source(std::string_view s);

}  // namespace tsformer
