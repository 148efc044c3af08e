#include "gripsim/io/model_file.hpp"

#include <fstream>

#include "gripsim/io/binary.hpp"

namespace gripsim {

namespace {
constexpr std::uint32_t kModelMagic = 0x4c444d47;  // "GMDL"
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void write_model(std::ostream& os, const ModelFile& m) {
  bin::write(os, kModelMagic);
  bin::write(os, kModelVersion);
  bin::write_string(os, m.label);
  bin::write<std::int32_t>(os, m.generator.frozen_prefix);
  write_mlp(os, m.generator.mlp);
  bin::write<std::uint8_t>(os, m.has_surrogate ? 1 : 0);
  if (m.has_surrogate) write_stability_net(os, m.surrogate);
}

ModelFile read_model(std::istream& is) {
  bin::expect_magic(is, kModelMagic, kModelVersion, "model file");
  ModelFile m;
  m.label = bin::read_string(is);
  m.generator.frozen_prefix = bin::read<std::int32_t>(is);
  m.generator.mlp = read_mlp(is);
  if (m.generator.mlp.output_size() <= 18) throw InputError("model file: generator output too small");
  m.has_surrogate = bin::read<std::uint8_t>(is) != 0;
  if (m.has_surrogate) m.surrogate = read_stability_net(is);
  return m;
}

void save_model(const std::string& path, const ModelFile& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  write_model(os, m);
  if (!os) throw InputError("failed writing " + path);
}

ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  return read_model(is);
}

}  // namespace gripsim
