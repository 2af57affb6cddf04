#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sclm/errors.hpp"
#include "sclm/io.hpp"
#include "sclm/lm.hpp"

namespace sclm::lm {

namespace {

constexpr std::string_view kMagic = "sclm-model";
constexpr int kFormatVersion = 1;

void put_f32(std::ostream& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  const char bytes[4] = {char(bits & 0xff), char((bits >> 8) & 0xff), char((bits >> 16) & 0xff),
                         char((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

bool get_f32(std::istream& in, float& value) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                             (std::uint32_t(b[3]) << 24);
  value = std::bit_cast<float>(bits);
  return true;
}

class HeaderReader {
 public:
  HeaderReader(std::istream& in, std::string where) : in_(in), where_(std::move(where)) {}

  std::istringstream line() {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of header");
    ++line_no_;
    return std::istringstream(text);
  }

  template <typename V>
  V field(std::string_view key) {
    auto ls = line();
    std::string k;
    V value{};
    if (!(ls >> k) || k != key || !(ls >> value)) fail("expected '" + std::string(key) + " <value>'");
    return value;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(where_, line_no_, what); }

 private:
  std::istream& in_;
  std::string where_;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string format_config(const LmConfig& c) {
  std::ostringstream out;
  out << "num_layers=" << c.num_layers << " cells=" << c.cells << " lr=" << io::format_double(c.lr)
      << " clip_norm=" << io::format_double(c.clip_norm) << " dropout=" << io::format_double(c.dropout)
      << " init_range=" << io::format_double(c.init_range) << " epochs=" << c.epochs
      << " bptt_chunk=" << c.bptt_chunk << " batch_size=" << c.batch_size << " patience=" << c.patience
      << " seed=" << c.seed;
  return out.str();
}

LmConfig parse_config(const std::string& text) {
  LmConfig c;
  std::istringstream in(text);
  std::string item;
  while (in >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("bad config item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    auto integer = [&](auto& field) {
      const auto* end = value.data() + value.size();
      const auto [ptr, ec] = std::from_chars(value.data(), end, field);
      if (ec != std::errc() || ptr != end) throw ConfigError("config " + key + " is not an integer: '" + value + "'");
    };
    if (key == "num_layers") integer(c.num_layers);
    else if (key == "cells") integer(c.cells);
    else if (key == "lr") c.lr = io::parse_double(value);
    else if (key == "clip_norm") c.clip_norm = io::parse_double(value);
    else if (key == "dropout") c.dropout = io::parse_double(value);
    else if (key == "init_range") c.init_range = io::parse_double(value);
    else if (key == "epochs") integer(c.epochs);
    else if (key == "bptt_chunk") integer(c.bptt_chunk);
    else if (key == "batch_size") integer(c.batch_size);
    else if (key == "patience") integer(c.patience);
    else if (key == "seed") integer(c.seed);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

void save_model(const LmModel& model, std::ostream& out) {
  const auto& p = model.params;
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "vocab_size " << p.vocab_size() << '\n';
  out << "width " << p.width() << '\n';
  out << "num_layers " << p.num_layers() << '\n';
  out << "config " << format_config(model.config) << '\n';
  out << "calls " << model.vocab.real_size() << '\n';
  for (std::size_t i = 0; i < model.vocab.real_size(); ++i) {
    out << (i == 0 ? "" : " ") << model.vocab.raw_ids()[i];
  }
  out << '\n';
  out << "log " << model.training_log.size() << '\n';
  for (const auto& r : model.training_log) {
    out << r.epoch << ' ' << io::format_double(r.train_loss) << ' ' << io::format_double(r.validation_nll) << '\n';
  }
  const auto layout = p.layout();
  out << "tensors " << layout.size() << '\n';
  for (const auto& [name, shape] : layout) out << name << ' ' << shape.first << ' ' << shape.second << '\n';
  out << "data\n";
  for (const auto& tensor : p.tensors()) {
    for (float v : tensor) put_f32(out, v);
  }
  if (!out) throw ConfigError("failed writing model");
}

void save_model(const LmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  save_model(model, out);
}

LmModel load_model(std::istream& in, const std::string& where) {
  HeaderReader header(in, where);
  {
    auto ls = header.line();
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic) header.fail("not a model file");
    if (version != kFormatVersion) header.fail("unsupported model format version " + std::to_string(version));
  }
  const auto vocab_size = header.field<std::size_t>("vocab_size");
  const auto width = header.field<int>("width");
  const auto num_layers = header.field<int>("num_layers");

  LmModel model;
  {
    auto ls = header.line();
    std::string key;
    ls >> key;
    if (key != "config") header.fail("expected config line");
    std::string rest;
    std::getline(ls, rest);
    try {
      model.config = parse_config(rest);
    } catch (const std::exception& e) {
      header.fail(e.what());
    }
  }
  const auto n_calls = header.field<std::size_t>("calls");
  {
    auto ls = header.line();
    std::vector<corpus::CallId> ids(n_calls);
    for (auto& id : ids) {
      if (!(ls >> id)) header.fail("truncated call list");
    }
    model.vocab = SyscallVocab(std::move(ids));
    if (model.vocab.real_size() != n_calls) header.fail("duplicate call ids");
  }
  if (model.vocab.size() != vocab_size) header.fail("vocab_size disagrees with call list");

  const auto n_log = header.field<std::size_t>("log");
  for (std::size_t i = 0; i < n_log; ++i) {
    auto ls = header.line();
    std::string epoch, train, val;
    if (!(ls >> epoch >> train >> val)) header.fail("bad log line");
    try {
      model.training_log.push_back({std::stoi(epoch), io::parse_double(train), io::parse_double(val)});
    } catch (const std::exception& e) {
      header.fail(e.what());
    }
  }

  model.params = LmParams::zeros(vocab_size, width, num_layers);
  const auto layout = model.params.layout();
  if (header.field<std::size_t>("tensors") != layout.size()) header.fail("tensor count mismatch");
  for (const auto& [name, shape] : layout) {
    auto ls = header.line();
    std::string n;
    long rows = 0, cols = 0;
    if (!(ls >> n >> rows >> cols) || n != name || rows != shape.first || cols != shape.second) {
      header.fail("expected tensor " + name + " " + std::to_string(shape.first) + " " + std::to_string(shape.second));
    }
  }
  {
    auto ls = header.line();
    std::string tag;
    if (!(ls >> tag) || tag != "data") header.fail("expected data marker");
  }
  for (auto tensor : model.params.tensors()) {
    for (float& v : tensor) {
      if (!get_f32(in, v)) throw ParseError(where, 0, "truncated tensor data");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(where, 0, "trailing bytes after tensor data");
  return model;
}

LmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model " + path.string());
  return load_model(in, path.string());
}

}  // namespace sclm::lm
