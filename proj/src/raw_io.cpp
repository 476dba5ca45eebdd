// SPDX-License-Identifier: Apache-2.0
#include "flutesim/raw_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include "flutesim/errors.hpp"

namespace flutesim {
namespace {

std::vector<std::uint8_t> read_exact(const std::string& path,
                                     std::size_t bytes) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != bytes) {
    throw InputError("'" + path + "' holds " + std::to_string(size) +
                     " bytes, expected " + std::to_string(bytes) +
                     " for the given dims");
  }
  std::vector<std::uint8_t> buf(bytes);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw InputError("short read from '" + path + "'");
  return buf;
}

void write_all(const std::string& path, const std::uint8_t* data,
               std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw InputError("write to '" + path + "' failed");
}

void check_dims(int rows, int cols) {
  if (rows < 1 || cols < 1) throw InputError("raw matrix dims must be >= 1");
}

}  // namespace

MatF read_f32_raw(const std::string& path, int rows, int cols) {
  check_dims(rows, cols);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::vector<std::uint8_t> buf = read_exact(path, count * 4);
  MatF m(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = static_cast<std::uint32_t>(buf[i * 4]) |
                      (static_cast<std::uint32_t>(buf[i * 4 + 1]) << 8) |
                      (static_cast<std::uint32_t>(buf[i * 4 + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf[i * 4 + 3]) << 24);
    m.data[i] = std::bit_cast<float>(u);
  }
  return m;
}

MatH read_f16_raw(const std::string& path, int rows, int cols) {
  check_dims(rows, cols);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::vector<std::uint8_t> buf = read_exact(path, count * 2);
  MatH m(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    m.data[i] = Half::from_bits(static_cast<std::uint16_t>(
        buf[i * 2] | (static_cast<std::uint16_t>(buf[i * 2 + 1]) << 8)));
  }
  return m;
}

void write_f32_raw(const std::string& path, const MatF& m) {
  std::vector<std::uint8_t> buf(m.size() * 4);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(m.data[i]);
    buf[i * 4] = static_cast<std::uint8_t>(u & 0xFF);
    buf[i * 4 + 1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
    buf[i * 4 + 2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
    buf[i * 4 + 3] = static_cast<std::uint8_t>((u >> 24) & 0xFF);
  }
  write_all(path, buf.data(), buf.size());
}

void write_f16_raw(const std::string& path, const MatH& m) {
  std::vector<std::uint8_t> buf(m.size() * 2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint16_t u = m.data[i].to_bits();
    buf[i * 2] = static_cast<std::uint8_t>(u & 0xFF);
    buf[i * 2 + 1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
  }
  write_all(path, buf.data(), buf.size());
}

}  // namespace flutesim
