// SPDX-License-Identifier: Apache-2.0
#include "flutesim/flte.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "flutesim/errors.hpp"

namespace flutesim {
namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xFF));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v & 0xFFFF));
    u16(static_cast<std::uint16_t>(v >> 16));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  std::uint8_t u8(const char* section) {
    const int c = in_.get();
    if (c == EOF) {
      throw ParseError("unexpected end of file", section, offset_);
    }
    ++offset_;
    return static_cast<std::uint8_t>(c);
  }
  std::uint16_t u16(const char* section) {
    const std::uint16_t lo = u8(section);
    return static_cast<std::uint16_t>(lo | (u8(section) << 8));
  }
  std::uint32_t u32(const char* section) {
    const std::uint32_t lo = u16(section);
    return lo | (static_cast<std::uint32_t>(u16(section)) << 16);
  }
  bool at_eof() {
    return in_.peek() == EOF;
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

std::size_t expected_words(int k, int n, int slice_bits) {
  const std::size_t bits =
      static_cast<std::size_t>(k) * static_cast<std::size_t>(n) * slice_bits;
  return (bits + 31) / 32;
}

}  // namespace

PackedWeights FlteModel::packed() const {
  PackedWeights pw;
  pw.slices = slices;
  pw.layout = layout;
  pw.bits = cfg.bits;
  pw.k = k;
  pw.n = n;
  return pw;
}

FlteModel make_flte_model(const QuantizedMatrix& q, const PackedWeights& pw) {
  FlteModel model;
  model.cfg = q.cfg;
  model.k = q.k;
  model.n = q.n;
  model.table.resize(q.table.values.size());
  for (std::size_t i = 0; i < model.table.size(); ++i) {
    model.table[i] = f32_to_f16(q.table.values[i]);
  }
  model.scales = q.scales;
  model.slices = pw.slices;
  model.layout = pw.layout;
  return model;
}

void write_flte(std::ostream& out, const FlteModel& model) {
  Writer w(out);
  out.write(kFlteMagic, 4);
  w.u8(kFlteVersion);
  w.u8(static_cast<std::uint8_t>(model.cfg.bits));
  w.u32(static_cast<std::uint32_t>(model.cfg.group_size));
  w.u32(static_cast<std::uint32_t>(model.k));
  w.u32(static_cast<std::uint32_t>(model.n));
  w.u8(static_cast<std::uint8_t>(model.slices.size()));
  for (const Half h : model.table) w.u16(h.to_bits());
  for (const Half h : model.scales) w.u16(h.to_bits());
  for (const BitSlice& slice : model.slices) {
    w.u8(static_cast<std::uint8_t>(slice.bits));
    w.u32(static_cast<std::uint32_t>(slice.words.size()));
    for (const std::uint32_t word : slice.words) w.u32(word);
  }
  w.u16(static_cast<std::uint16_t>(model.layout.tile_m));
  w.u16(static_cast<std::uint16_t>(model.layout.tile_n));
  w.u16(static_cast<std::uint16_t>(model.layout.tile_k));
  w.u16(static_cast<std::uint16_t>(model.layout.frag_m));
  w.u16(static_cast<std::uint16_t>(model.layout.frag_n));
  w.u16(static_cast<std::uint16_t>(model.layout.frag_k));
  if (!out) throw InputError("flte: write failed");
}

FlteModel read_flte(std::istream& in) {
  Reader r(in);
  FlteModel model;

  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8("magic"));
  if (std::memcmp(magic, kFlteMagic, 4) != 0) {
    throw ParseError("bad magic", "magic", 0);
  }
  const std::uint8_t version = r.u8("version");
  if (version != kFlteVersion) {
    throw ParseError("unsupported version " + std::to_string(version),
                     "version", r.offset() - 1);
  }
  model.cfg.bits = r.u8("bits");
  model.cfg.group_size = static_cast<int>(r.u32("group"));
  model.k = static_cast<int>(r.u32("k"));
  model.n = static_cast<int>(r.u32("n"));
  const std::uint8_t slice_count = r.u8("slice_count");

  try {
    model.cfg.validate(model.k);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), "header", r.offset());
  }
  if (model.k <= 0 || model.n <= 0) {
    throw ParseError("non-positive dims", "header", r.offset());
  }
  const int expected_slices = model.cfg.bits == 3 ? 2 : 1;
  if (slice_count != expected_slices) {
    throw ParseError("expected " + std::to_string(expected_slices) +
                         " slices for " + std::to_string(model.cfg.bits) +
                         " bits, got " + std::to_string(slice_count),
                     "slice_count", r.offset() - 1);
  }

  model.table.resize(static_cast<std::size_t>(1) << model.cfg.bits);
  for (Half& h : model.table) h = Half::from_bits(r.u16("table"));

  const std::size_t scale_count = static_cast<std::size_t>(model.k) * model.n /
                                  model.cfg.group_size;
  model.scales.resize(scale_count);
  for (Half& h : model.scales) h = Half::from_bits(r.u16("scales"));

  int width_sum = 0;
  for (int s = 0; s < slice_count; ++s) {
    BitSlice slice;
    slice.bits = r.u8("slice_bits");
    if (slice.bits != 1 && slice.bits != 2 && slice.bits != 4) {
      throw ParseError("slice width must be 1, 2, or 4", "slice_bits",
                       r.offset() - 1);
    }
    width_sum += slice.bits;
    const std::uint32_t words = r.u32("slice_word_count");
    const std::size_t expected = expected_words(model.k, model.n, slice.bits);
    if (words != expected) {
      throw ParseError("slice declares " + std::to_string(words) +
                           " words, expected " + std::to_string(expected),
                       "slice_word_count", r.offset() - 4);
    }
    slice.words.resize(words);
    for (std::uint32_t& word : slice.words) word = r.u32("slice_words");
    model.slices.push_back(std::move(slice));
  }
  if (width_sum != model.cfg.bits) {
    throw ParseError("slice widths sum to " + std::to_string(width_sum) +
                         ", expected " + std::to_string(model.cfg.bits),
                     "slices", r.offset());
  }
  if (model.cfg.bits == 3 &&
      (model.slices[0].bits != 2 || model.slices[1].bits != 1)) {
    throw ParseError("3-bit slices must be ordered [2, 1]", "slices",
                     r.offset());
  }

  model.layout.tile_m = r.u16("layout");
  model.layout.tile_n = r.u16("layout");
  model.layout.tile_k = r.u16("layout");
  model.layout.frag_m = r.u16("layout");
  model.layout.frag_n = r.u16("layout");
  model.layout.frag_k = r.u16("layout");
  try {
    model.layout.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), "layout", r.offset());
  }
  if (model.k % model.layout.tile_k != 0 || model.n % model.layout.tile_n != 0) {
    throw ParseError("dims do not divide by tile dims", "layout", r.offset());
  }
  if (!r.at_eof()) {
    throw ParseError("trailing bytes after layout", "end", r.offset());
  }
  return model;
}

void write_flte_file(const std::string& path, const FlteModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_flte(out, model);
}

FlteModel read_flte_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return read_flte(in);
}

}  // namespace flutesim
