#include "team/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "team/errors.hpp"

namespace team {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ResourceError("write failed for " + path.string());
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

// Little-endian writer/reader for checkpoints.
class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes.push_back(static_cast<unsigned char>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) bytes.push_back(static_cast<unsigned char>(v >> s));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> b) : bytes_(std::move(b)) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LengthError("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= std::uint32_t{bytes_[pos_++]} << s;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= std::uint64_t{bytes_[pos_++]} << s;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kMaxDimension = 1u << 20;

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int class_count) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  if (ib.size() < 16) throw LengthError("IDX image header is truncated");
  if (lb.size() < 8) throw LengthError("IDX label header is truncated");
  if (read_be32(ib, 0) != kIdxImageMagic) throw FormatError("bad IDX image magic in " + images.string());
  if (read_be32(lb, 0) != kIdxLabelMagic) throw FormatError("bad IDX label magic in " + labels.string());
  const std::uint32_t count = read_be32(ib, 4);
  const std::uint32_t rows = read_be32(ib, 8);
  const std::uint32_t cols = read_be32(ib, 12);
  const std::uint32_t label_count = read_be32(lb, 4);
  if (rows == 0 || cols == 0 || rows > kMaxDimension / cols) {
    throw FormatError("bad IDX image dimensions");
  }
  const std::size_t pixels = std::size_t{rows} * cols;
  if (ib.size() - 16 < std::size_t{count} * pixels) throw LengthError("IDX image payload is truncated");
  if (lb.size() - 8 < label_count) throw LengthError("IDX label payload is truncated");
  if (count != label_count) {
    throw ConsistencyError("IDX files disagree: " + std::to_string(count) + " images, " +
                           std::to_string(label_count) + " labels");
  }
  std::vector<Image> xs;
  std::vector<int> ys;
  xs.reserve(count);
  ys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector v(static_cast<Eigen::Index>(pixels));
    const unsigned char* p = ib.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) v[static_cast<Eigen::Index>(j)] = p[j] / 255.0;
    xs.emplace_back(std::move(v), static_cast<int>(rows), static_cast<int>(cols));
    ys.push_back(lb[8 + i]);
  }
  return Dataset(std::move(xs), std::move(ys), class_count);
}

void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  if (data.empty()) throw EmptyInputError("cannot write an empty IDX dataset");
  const Image& first = data.image(0);
  if (first.channels() != 1) throw UnsupportedError("IDX export supports one channel");
  std::vector<unsigned char> ib, lb;
  put_be32(ib, kIdxImageMagic);
  put_be32(ib, static_cast<std::uint32_t>(data.size()));
  put_be32(ib, static_cast<std::uint32_t>(first.height()));
  put_be32(ib, static_cast<std::uint32_t>(first.width()));
  put_be32(lb, kIdxLabelMagic);
  put_be32(lb, static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector& v = data.image(i).pixels();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      ib.push_back(static_cast<unsigned char>(std::lround(v[j] * 255.0)));
    }
    lb.push_back(static_cast<unsigned char>(data.label(i)));
  }
  write_file(images, ib);
  write_file(labels, lb);
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "all_black" || name == "black") return SynthKind::all_black;
  if (name == "all_white" || name == "white") return SynthKind::all_white;
  if (name == "uniform_noise" || name == "noise") return SynthKind::uniform_noise;
  throw ConfigError("unknown synthetic image kind '" + std::string(name) + "'");
}

Image synth_image(SynthKind kind, int height, int width, std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw ShapeError("synthetic image needs positive dimensions");
  const Eigen::Index n = Eigen::Index{height} * width;
  switch (kind) {
    case SynthKind::all_black:
      return Image(Vector::Zero(n), height, width);
    case SynthKind::all_white:
      return Image(Vector::Ones(n), height, width);
    case SynthKind::uniform_noise: {
      Rng rng(seed);
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform();
      return Image(std::move(v), height, width);
    }
  }
  throw ConfigError("unknown synthetic image kind");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     std::string_view metadata) {
  Writer w;
  w.raw("TEAM");
  w.u32(kCheckpointVersion);
  w.u64(model.seed());
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const DenseLayer& l : model.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in()));
    w.u32(static_cast<std::uint32_t>(l.out()));
    w.u32(static_cast<std::uint32_t>(l.activation));
  }
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.raw(metadata);
  for (const DenseLayer& l : model.layers()) {
    for (Eigen::Index r = 0; r < l.out(); ++r)
      for (Eigen::Index c = 0; c < l.in(); ++c) w.f32(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.out(); ++r) w.f32(l.bias[r]);
  }
  write_file(path, w.bytes);
}

LoadedCheckpoint load_checkpoint_with_metadata(const std::filesystem::path& path) {
  Reader r(read_file(path));
  if (r.raw(4) != "TEAM") throw FormatError(path.string() + " is not a model checkpoint");
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " is newer than supported version " + std::to_string(kCheckpointVersion));
  }
  if (version == 0) throw FormatError("checkpoint version 0 is invalid");
  const std::uint64_t seed = r.u64();
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 1024) throw FormatError("bad layer count in checkpoint");
  struct Shape {
    std::uint32_t in, out, act;
  };
  std::vector<Shape> shapes(count);
  for (Shape& s : shapes) {
    s.in = r.u32();
    s.out = r.u32();
    s.act = r.u32();
    if (s.in == 0 || s.out == 0 || s.in > kMaxDimension || s.out > kMaxDimension) {
      throw FormatError("bad layer dimensions in checkpoint");
    }
    if (s.act > static_cast<std::uint32_t>(Activation::relu)) throw FormatError("bad activation code");
  }
  const std::uint32_t meta_len = r.u32();
  std::string metadata = r.raw(meta_len);
  std::vector<DenseLayer> layers;
  for (const Shape& s : shapes) {
    DenseLayer l;
    r.need((std::size_t{s.in} * s.out + s.out) * 4);
    l.weight.resize(s.out, s.in);
    l.bias.resize(s.out);
    l.activation = static_cast<Activation>(s.act);
    for (std::uint32_t i = 0; i < s.out; ++i)
      for (std::uint32_t j = 0; j < s.in; ++j) l.weight(i, j) = r.f32();
    for (std::uint32_t i = 0; i < s.out; ++i) l.bias[i] = r.f32();
    layers.push_back(std::move(l));
  }
  if (!r.done()) throw LengthError("checkpoint has trailing bytes");
  return {Model(std::move(layers), seed), std::move(metadata)};
}

Model load_checkpoint(const std::filesystem::path& path) {
  return load_checkpoint_with_metadata(path).model;
}

}  // namespace team
