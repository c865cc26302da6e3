#include "dcnn/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace dcnn {

namespace {

constexpr char kMagicLine[] = "DCNN-WEIGHTS v1";

// Little-endian float blob helpers. Host is assumed little-endian for the
// fast path; the byte-wise fallback keeps the format portable.
void floats_to_bytes(const std::vector<float>& v, std::string& out) {
  static_assert(sizeof(float) == 4);
  const std::size_t base = out.size();
  out.resize(base + v.size() * 4);
  std::memcpy(out.data() + base, v.data(), v.size() * 4);
}

std::string spec_line(const LayerSpec& l) {
  std::ostringstream os;
  os << "layer " << layer_kind_name(l.kind) << " " << l.name;
  switch (l.kind) {
    case LayerKind::Conv2D:
      os << " " << l.out_channels << " " << l.in_channels << " " << l.kernel << " " << l.stride
         << " " << l.padding;
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
      os << " " << l.kernel << " " << l.stride;
      break;
    case LayerKind::Dense:
      os << " " << l.out_dim << " " << l.in_dim;
      break;
    default:
      break;
  }
  return os.str();
}

}  // namespace

void save_model(const ModelGraph& model, const std::string& path) {
  std::ostringstream header;
  header << kMagicLine << "\n";
  header << "model " << model.name << "\n";
  header << "input_shape";
  for (int d : model.input_shape) header << " " << d;
  header << "\n";
  header << "layers " << model.layers.size() << "\n";
  for (const auto& l : model.layers) header << spec_line(l) << "\n";

  std::string blobs;
  for (const auto& l : model.layers) {
    if (!layer_has_params(l.kind)) continue;
    const LayerParams& p = model.params.at(l.name);
    header << "param " << l.name << " weights";
    for (int d : p.weights.shape) header << " " << d;
    header << " offset " << blobs.size() << "\n";
    floats_to_bytes(p.weights.data, blobs);
    header << "param " << l.name << " bias";
    for (int d : p.bias.shape) header << " " << d;
    header << " offset " << blobs.size() << "\n";
    floats_to_bytes(p.bias.data, blobs);
  }
  header << "end-header\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ModelIoError("cannot open '" + path + "' for writing");
  const std::string h = header.str();
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  f.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!f) throw ModelIoError("short write to '" + path + "'");
}

namespace {

struct ParamEntry {
  std::string layer;
  bool is_bias = false;
  Shape shape;
  std::size_t offset = 0;
};

[[noreturn]] void fail_at(std::size_t offset, const std::string& what) {
  throw ModelIoError("malformed weight file at byte " + std::to_string(offset) + ": " + what);
}

}  // namespace

ModelGraph load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelIoError("cannot open '" + path + "'");
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  ModelGraph m;
  std::vector<ParamEntry> entries;
  std::size_t pos = 0;
  std::size_t declared_layers = 0;
  bool saw_end = false;

  auto next_line = [&](std::string& line) -> bool {
    if (pos >= content.size()) return false;
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) fail_at(pos, "unterminated header line");
    line = content.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };

  std::string line;
  std::size_t line_start = 0;
  if (!next_line(line) || line != kMagicLine) fail_at(0, "bad magic line");

  while (true) {
    line_start = pos;
    if (!next_line(line)) fail_at(pos, "missing end-header");
    if (line == "end-header") {
      saw_end = true;
      break;
    }
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "model") {
      is >> m.name;
    } else if (tag == "input_shape") {
      int d;
      while (is >> d) m.input_shape.push_back(d);
    } else if (tag == "layers") {
      if (!(is >> declared_layers)) fail_at(line_start, "bad layer count");
    } else if (tag == "layer") {
      std::string kind_s, name;
      if (!(is >> kind_s >> name)) fail_at(line_start, "bad layer line");
      LayerKind kind;
      try {
        kind = layer_kind_from_name(kind_s);
      } catch (const std::invalid_argument& e) {
        fail_at(line_start, e.what());
      }
      LayerSpec spec;
      switch (kind) {
        case LayerKind::Conv2D: {
          int oc, ic, k, st, pd;
          if (!(is >> oc >> ic >> k >> st >> pd)) fail_at(line_start, "bad conv params");
          spec = LayerSpec::conv2d(name, oc, ic, k, st, pd);
          break;
        }
        case LayerKind::MaxPool2D:
        case LayerKind::AvgPool2D: {
          int k, st;
          if (!(is >> k >> st)) fail_at(line_start, "bad pool params");
          spec = kind == LayerKind::MaxPool2D ? LayerSpec::maxpool(name, k, st)
                                              : LayerSpec::avgpool(name, k, st);
          break;
        }
        case LayerKind::Dense: {
          int od, id;
          if (!(is >> od >> id)) fail_at(line_start, "bad dense params");
          spec = LayerSpec::dense(name, od, id);
          break;
        }
        case LayerKind::ReLU:
          spec = LayerSpec::relu(name);
          break;
        case LayerKind::Flatten:
          spec = LayerSpec::flatten(name);
          break;
        case LayerKind::Softmax:
          spec = LayerSpec::softmax(name);
          break;
      }
      m.layers.push_back(std::move(spec));
    } else if (tag == "param") {
      ParamEntry e;
      std::string which;
      if (!(is >> e.layer >> which)) fail_at(line_start, "bad param line");
      if (which != "weights" && which != "bias") fail_at(line_start, "bad param tensor tag");
      e.is_bias = which == "bias";
      std::vector<std::string> toks;
      std::string t;
      while (is >> t) toks.push_back(t);
      if (toks.size() < 3 || toks[toks.size() - 2] != "offset") {
        fail_at(line_start, "bad param shape/offset");
      }
      try {
        for (std::size_t i = 0; i + 2 < toks.size(); ++i) e.shape.push_back(std::stoi(toks[i]));
        e.offset = std::stoull(toks.back());
      } catch (const std::exception&) {
        fail_at(line_start, "bad param shape/offset");
      }
      if (e.shape.empty()) fail_at(line_start, "empty param shape");
      entries.push_back(std::move(e));
    } else {
      fail_at(line_start, "unknown header tag '" + tag + "'");
    }
  }
  if (!saw_end) fail_at(pos, "missing end-header");
  if (declared_layers != m.layers.size()) {
    fail_at(line_start, "layer count mismatch: declared " + std::to_string(declared_layers) +
                            ", found " + std::to_string(m.layers.size()));
  }

  const std::size_t blob_base = pos;
  const std::size_t blob_len = content.size() - blob_base;
  for (const auto& e : entries) {
    const std::size_t n = shape_elems(e.shape);
    if (e.offset + n * 4 > blob_len) {
      throw ModelIoError("weight file truncated: layer '" + e.layer + "' " +
                         (e.is_bias ? "bias" : "weights") + " blob of shape " +
                         shape_str(e.shape) + " exceeds file (needs " +
                         std::to_string(e.offset + n * 4) + " blob bytes, have " +
                         std::to_string(blob_len) + ")");
    }
    Tensor t(e.shape);
    std::memcpy(t.data.data(), content.data() + blob_base + e.offset, n * 4);
    LayerParams& p = m.params[e.layer];
    (e.is_bias ? p.bias : p.weights) = std::move(t);
  }

  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw ModelIoError(std::string("weight file manifest mismatch: ") + e.what());
  }
  return m;
}

}  // namespace dcnn
