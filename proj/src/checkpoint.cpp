#include "ghostcert/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "ghostcert/conv_net.hpp"
#include "ghostcert/ensemble.hpp"
#include "ghostcert/error.hpp"

namespace ghostcert {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'C', 'K', 'P'};

json shape_json(const Shape& s) { return json::array({s.height, s.width, s.channels}); }

Shape shape_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("checkpoint: malformed shape");
  return Shape{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  const auto at = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("checkpoint: truncated", at);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  const auto at = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw FormatError("checkpoint: truncated", at);
  return v;
}

void write_record(std::ostream& out, const json& header, std::span<const double> params) {
  const std::string text = header.dump();
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_u64(out, params.size());
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
}

struct Record {
  json header;
  std::vector<double> params;
};

Record read_record(std::istream& in) {
  const auto len = read_u32(in);
  if (len > (1u << 24)) throw FormatError("checkpoint: descriptor too large", static_cast<std::uint64_t>(in.tellg()));
  std::string text(len, '\0');
  const auto at = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(text.data(), len)) throw FormatError("checkpoint: truncated descriptor", at);
  Record r;
  try {
    r.header = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad descriptor: ") + e.what(), at);
  }
  const auto n = read_u64(in);
  r.params.resize(n);
  const auto pat = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(r.params.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw FormatError("checkpoint: truncated parameters, expected " + std::to_string(n) + " values", pat);
  }
  return r;
}

void write_denoiser_record(std::ostream& out, const Denoiser& d) {
  if (const auto* conv = dynamic_cast<const ConvDenoiser*>(&d)) {
    const auto& a = conv->architecture();
    write_record(out,
                 {{"kind", "conv_denoiser"}, {"input", shape_json(a.input)}, {"hidden_channels", a.hidden_channels},
                  {"hidden_layers", a.hidden_layers}, {"sigma", conv->sigma()}},
                 conv->parameters());
  } else if (dynamic_cast<const IdentityDenoiser*>(&d)) {
    write_record(out, {{"kind", "identity"}, {"input", shape_json(d.shape())}}, {});
  } else {
    throw UnsupportedError("cannot serialize denoiser of kind " + d.kind());
  }
}

DenoiserPtr denoiser_from(const Record& r) {
  const auto kind = r.header.at("kind").get<std::string>();
  if (kind == "identity") return std::make_shared<IdentityDenoiser>(shape_from(r.header.at("input")));
  if (kind == "conv_denoiser") {
    DenoiserArchitecture a;
    a.input = shape_from(r.header.at("input"));
    a.hidden_channels = r.header.at("hidden_channels").get<int>();
    a.hidden_layers = r.header.at("hidden_layers").get<int>();
    return std::make_shared<ConvDenoiser>(a, r.header.at("sigma").get<double>(), r.params);
  }
  throw FormatError("checkpoint: unknown denoiser kind '" + kind + "'");
}

void write_magic(std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);
}

void read_magic(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a ghostcert checkpoint", 0);
  const auto version = read_u32(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
}

}  // namespace

void write_classifier(std::ostream& out, const Classifier& clf) {
  if (const auto* net = dynamic_cast<const SmallConvNet*>(&clf)) {
    const auto& a = net->architecture();
    write_record(out,
                 {{"kind", "small_conv_net"}, {"input", shape_json(a.input)}, {"conv_channels", a.conv_channels},
                  {"num_classes", a.num_classes}},
                 net->parameters());
  } else if (const auto* lin = dynamic_cast<const LinearClassifier*>(&clf)) {
    std::vector<double> params(lin->weights());
    params.insert(params.end(), lin->bias().begin(), lin->bias().end());
    write_record(out, {{"kind", "linear"}, {"input", shape_json(lin->input_shape())}, {"num_classes", lin->num_classes()}},
                 params);
  } else if (const auto* ens = dynamic_cast<const Ensemble*>(&clf)) {
    write_record(out, {{"kind", "ensemble"}, {"members", ens->size()}}, {});
    for (const auto& m : ens->members()) write_classifier(out, *m);
  } else if (const auto* den = dynamic_cast<const DenoisedClassifier*>(&clf)) {
    write_record(out, {{"kind", "denoised"}}, {});
    write_classifier(out, *den->base());
    write_denoiser_record(out, *den->denoiser());
  } else {
    throw UnsupportedError("cannot serialize classifier of kind " + clf.kind());
  }
}

ClassifierPtr read_classifier(std::istream& in) {
  const Record r = read_record(in);
  const auto kind = r.header.at("kind").get<std::string>();
  if (kind == "small_conv_net") {
    Architecture a;
    a.input = shape_from(r.header.at("input"));
    a.conv_channels = r.header.at("conv_channels").get<std::vector<int>>();
    a.num_classes = r.header.at("num_classes").get<int>();
    return std::make_shared<SmallConvNet>(a, r.params);
  }
  if (kind == "linear") {
    const Shape input = shape_from(r.header.at("input"));
    const int classes = r.header.at("num_classes").get<int>();
    const auto nw = input.size() * static_cast<std::size_t>(classes);
    if (r.params.size() != nw + static_cast<std::size_t>(classes)) throw FormatError("checkpoint: linear parameter count mismatch");
    return std::make_shared<LinearClassifier>(input, classes, std::vector<double>(r.params.begin(), r.params.begin() + static_cast<std::ptrdiff_t>(nw)),
                                              std::vector<double>(r.params.begin() + static_cast<std::ptrdiff_t>(nw), r.params.end()));
  }
  if (kind == "ensemble") {
    const auto k = r.header.at("members").get<std::size_t>();
    std::vector<ClassifierPtr> members;
    for (std::size_t i = 0; i < k; ++i) members.push_back(read_classifier(in));
    return std::make_shared<Ensemble>(std::move(members));
  }
  if (kind == "denoised") {
    auto base = read_classifier(in);
    auto den = denoiser_from(read_record(in));
    return compose_denoised(std::move(base), std::move(den));
  }
  throw FormatError("checkpoint: unknown classifier kind '" + kind + "'");
}

void save_classifier(const std::filesystem::path& path, const Classifier& clf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_magic(out);
  write_classifier(out, clf);
}

ClassifierPtr load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  read_magic(in);
  try {
    return read_classifier(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed descriptor: " + e.what());
  }
}

void save_denoiser(const std::filesystem::path& path, const Denoiser& denoiser) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_magic(out);
  write_denoiser_record(out, denoiser);
}

DenoiserPtr load_denoiser(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  read_magic(in);
  try {
    return denoiser_from(read_record(in));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed descriptor: " + e.what());
  }
}

}  // namespace ghostcert
