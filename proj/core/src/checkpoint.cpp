#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "natsel/error.hpp"
#include "natsel/model.hpp"

namespace natsel {

namespace {

constexpr const char* kMagic = "natsel-checkpoint 1";

void put_le64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

double get_le64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("checkpoint: truncated parameter block");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::istringstream expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing '" + key + "' line");
  std::istringstream fields(line);
  std::string got;
  fields >> got;
  if (got != key) throw FormatError("checkpoint: expected '" + key + "', got '" + got + "'");
  return fields;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Classifier& model) {
  const ClassifierConfig& cfg = model.config();
  out << kMagic << '\n';
  out << "input " << cfg.input.height << ' ' << cfg.input.width << ' ' << cfg.input.channels << '\n';
  out << "hidden " << cfg.hidden.size();
  for (std::size_t h : cfg.hidden) out << ' ' << h;
  out << '\n';
  out << "conv " << cfg.conv.kernel << ' ' << cfg.conv.out_channels << '\n';
  out << "classes " << cfg.num_classes << '\n';
  out << "init_seed " << cfg.init_seed << '\n';
  out << "parameters " << model.parameter_count() << '\n';
  out << "data\n";
  for (const Tensor& p : model.parameters()) {
    for (double v : p.data()) put_le64(out, v);
  }
}

Classifier load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError("checkpoint: bad magic line");

  ClassifierConfig cfg;
  if (!(expect_line(in, "input") >> cfg.input.height >> cfg.input.width >> cfg.input.channels)) {
    throw FormatError("checkpoint: malformed input line");
  }
  {
    auto fields = expect_line(in, "hidden");
    std::size_t n = 0;
    fields >> n;
    cfg.hidden.resize(n);
    for (auto& h : cfg.hidden) fields >> h;
    if (!fields) throw FormatError("checkpoint: malformed hidden line");
  }
  if (!(expect_line(in, "conv") >> cfg.conv.kernel >> cfg.conv.out_channels)) {
    throw FormatError("checkpoint: malformed conv line");
  }
  if (!(expect_line(in, "classes") >> cfg.num_classes)) throw FormatError("checkpoint: malformed classes line");
  if (!(expect_line(in, "init_seed") >> cfg.init_seed)) throw FormatError("checkpoint: malformed init_seed line");
  std::size_t count = 0;
  if (!(expect_line(in, "parameters") >> count)) throw FormatError("checkpoint: malformed parameters line");
  expect_line(in, "data");

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
  }
  const auto shapes = parameter_shapes(cfg);
  std::size_t expected = 0;
  for (const Shape& shape : shapes) expected += shape_size(shape);
  if (expected != count) throw FormatError("checkpoint: parameter count does not match the architecture");

  std::vector<Tensor> params;
  for (const Shape& shape : shapes) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = get_le64(in);
    params.emplace_back(shape, std::move(values));
  }
  return Classifier(std::move(cfg), std::move(params));
}

}  // namespace natsel
