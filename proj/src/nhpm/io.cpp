#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "conav/nhpm.hpp"

namespace conav {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'O', 'N', 'A', 'V', 'N', 'N', '1'};
constexpr char kDatasetMagic[7] = {'C', 'O', 'N', 'A', 'V', 'D', 'S'};
constexpr std::uint8_t kDatasetVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::IoError, "write to '" + path_.string() + "' failed");
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorCode::IoError, "'" + path_.string() + "' is truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t max_len = 256) {
    const std::uint32_t n = u32();
    if (n > max_len) throw Error(ErrorCode::IoError, "implausible string length in '" + path_.string() + "'");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

// Alternating run lengths starting with a run of zeros.
void write_rle(Writer& w, const std::vector<bool>& bits) {
  std::vector<std::uint32_t> runs;
  bool current = false;
  std::uint32_t run = 0;
  for (const bool b : bits) {
    if (b != current) {
      runs.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  runs.push_back(run);
  w.u32(static_cast<std::uint32_t>(runs.size()));
  for (const std::uint32_t r : runs) w.u32(r);
}

std::vector<bool> read_rle(Reader& r, std::size_t n) {
  const std::uint32_t count = r.u32();
  if (count > n + 1) throw Error(ErrorCode::IoError, "corrupt run-length mask");
  std::vector<bool> bits;
  bits.reserve(n);
  bool current = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t run = r.u32();
    if (bits.size() + run > n) throw Error(ErrorCode::IoError, "run-length mask overflows its grid");
    bits.insert(bits.end(), run, current);
    current = !current;
  }
  if (bits.size() != n) throw Error(ErrorCode::IoError, "run-length mask is short");
  return bits;
}

}  // namespace

void save_checkpoint(const ConvModelParams& params, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.str(to_string(params.architecture));
  w.u32(static_cast<std::uint32_t>(params.resolution));
  w.u32(static_cast<std::uint32_t>(params.layers.size()));
  for (const ConvLayer& l : params.layers) {
    w.u32(static_cast<std::uint32_t>(l.in_channels));
    w.u32(static_cast<std::uint32_t>(l.out_channels));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(static_cast<std::uint32_t>(l.upsample_to));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (const ConvLayer& l : params.layers) {
    for (const double v : l.weight) w.f32(static_cast<float>(v));
    for (const double v : l.bias) w.f32(static_cast<float>(v));
  }
  w.finish();
}

ConvModelParams load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kCheckpointMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::IoError, "'" + path.string() + "' is not a model checkpoint");
  }
  const Architecture arch = architecture_from_string(r.str());
  const int resolution = static_cast<int>(r.u32());
  if (resolution < 1 || resolution > 4096) throw Error(ErrorCode::InvalidArchitecture, "bad resolution");
  ConvModelParams p = make_architecture(arch, resolution);
  const std::uint32_t n_layers = r.u32();
  if (n_layers != p.layers.size()) {
    throw Error(ErrorCode::InvalidArchitecture, "checkpoint layer count does not match " + to_string(arch));
  }
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const ConvLayer& l = p.layers[i];
    const int in = static_cast<int>(r.u32()), out = static_cast<int>(r.u32());
    const int stride = static_cast<int>(r.u32()), up = static_cast<int>(r.u32());
    const auto act = static_cast<Activation>(r.u8());
    if (in != l.in_channels || out != l.out_channels || stride != l.stride || up != l.upsample_to ||
        act != l.activation) {
      std::ostringstream msg;
      msg << "checkpoint layer " << i << " has shape " << out << "x" << in << " stride " << stride
          << ", expected " << l.out_channels << "x" << l.in_channels << " stride " << l.stride;
      throw Error(ErrorCode::InvalidArchitecture, msg.str());
    }
  }
  for (ConvLayer& l : p.layers) {
    for (double& v : l.weight) v = r.f32();
    for (double& v : l.bias) v = r.f32();
  }
  if (!r.at_end()) throw Error(ErrorCode::IoError, "trailing bytes in checkpoint");
  return p;
}

void save_dataset(const std::vector<Segment>& segments, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u8(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(segments.size()));
  for (const Segment& s : segments) {
    const InputTensor t = encode(s);
    const EditMask y = s.label();
    w.u32(static_cast<std::uint32_t>(t.height));
    w.u32(static_cast<std::uint32_t>(t.width));
    w.u8(s.before.fixed_border ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.observation.camera.cell.row));
    w.u32(static_cast<std::uint32_t>(s.observation.camera.cell.col));
    w.u8(static_cast<std::uint8_t>(s.observation.camera.heading));
    w.u32(static_cast<std::uint32_t>(s.path.size()));
    for (const Cell c : s.path) {
      w.u32(static_cast<std::uint32_t>(c.row));
      w.u32(static_cast<std::uint32_t>(c.col));
    }
    const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
    for (int ch = 0; ch < InputTensor::kChannels; ++ch) {
      std::vector<bool> bits(plane);
      for (std::size_t i = 0; i < plane; ++i) bits[i] = t.data[ch * plane + i] >= 0.5f;
      write_rle(w, bits);
    }
    for (const Grid<std::uint8_t>* m : {&y.add, &y.remove}) {
      std::vector<bool> bits(plane);
      for (std::size_t i = 0; i < plane; ++i) bits[i] = m->data()[i] != 0;
      write_rle(w, bits);
    }
  }
  w.finish();
}

std::vector<Segment> load_dataset(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kDatasetMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kDatasetMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::IoError, "'" + path.string() + "' is not a segment dataset");
  }
  const std::uint8_t version = r.u8();
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::IoError, "unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<Segment> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const int h = static_cast<int>(r.u32()), w = static_cast<int>(r.u32());
    if (h < 1 || w < 1 || h > 4096 || w > 4096) throw Error(ErrorCode::IoError, "bad segment dimensions");
    const bool fixed = r.u8() != 0;
    Segment s;
    s.observation.camera.cell.row = static_cast<int>(r.u32());
    s.observation.camera.cell.col = static_cast<int>(r.u32());
    const std::uint8_t heading = r.u8();
    if (heading > 3) throw Error(ErrorCode::IoError, "bad camera heading");
    s.observation.camera.heading = static_cast<Direction>(heading);
    const std::uint32_t n_path = r.u32();
    if (n_path > static_cast<std::uint32_t>(h * w) * 4) throw Error(ErrorCode::IoError, "implausible path length");
    for (std::uint32_t i = 0; i < n_path; ++i) {
      const int row = static_cast<int>(r.u32());
      const int col = static_cast<int>(r.u32());
      s.path.push_back({row, col});
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    InputTensor t(h, w);
    for (int ch = 0; ch < InputTensor::kChannels; ++ch) {
      const std::vector<bool> bits = read_rle(r, plane);
      for (std::size_t i = 0; i < plane; ++i) t.data[ch * plane + i] = bits[i] ? 1.0f : 0.0f;
    }
    EditMask y(h, w);
    for (Grid<std::uint8_t>* m : {&y.add, &y.remove}) {
      const std::vector<bool> bits = read_rle(r, plane);
      for (std::size_t i = 0; i < plane; ++i) m->data()[i] = bits[i] ? 1 : 0;
    }
    s.before = decode_belief(t, fixed);
    const DecodedObservation obs = decode_observation(t);
    s.observation.visible = obs.visible;
    s.observation.labels = obs.labels;
    try {
      s.after = apply_edit(s.before, y);
      s.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::IoError, "record " + std::to_string(k) + " is inconsistent: " + e.what());
    }
    if (encode(s) != t) throw Error(ErrorCode::IoError, "record " + std::to_string(k) + " path mask mismatch");
    out.push_back(std::move(s));
  }
  if (!r.at_end()) throw Error(ErrorCode::IoError, "trailing bytes in dataset");
  return out;
}

}  // namespace conav
