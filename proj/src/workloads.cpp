#include "secured/workloads.hpp"

#include <fstream>
#include <sstream>

namespace secured {

const std::array<std::uint8_t, 256>& aes_sbox() {
  static const std::array<std::uint8_t, 256> s = [] {
    // Multiplicative inverse in GF(2^8) followed by the affine map.
    std::array<std::uint8_t, 256> t{};
    std::uint8_t p = 1, q = 1;
    do {
      p = static_cast<std::uint8_t>(p ^ (p << 1) ^ (p & 0x80 ? 0x1B : 0));
      q ^= static_cast<std::uint8_t>(q << 1);
      q ^= static_cast<std::uint8_t>(q << 2);
      q ^= static_cast<std::uint8_t>(q << 4);
      if (q & 0x80) q ^= 0x09;
      auto rotl8 = [](std::uint8_t x, int n) { return static_cast<std::uint8_t>((x << n) | (x >> (8 - n))); };
      t[p] = static_cast<std::uint8_t>(q ^ rotl8(q, 1) ^ rotl8(q, 2) ^ rotl8(q, 3) ^ rotl8(q, 4) ^ 0x63);
    } while (p != 1);
    t[0] = 0x63;
    return t;
  }();
  return s;
}

const std::array<std::uint8_t, 16>& feistel_sbox() {
  static const std::array<std::uint8_t, 16> s = {0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD,
                                                 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2};
  return s;
}

std::vector<Word> aes_keyed_table(std::uint8_t k) {
  std::vector<Word> t(256);
  for (unsigned j = 0; j < 256; ++j) t[j] = aes_sbox()[j ^ k];
  return t;
}

std::uint8_t feistel_round(std::uint8_t s, unsigned k4) {
  const unsigned l = s >> 4, r = s & 0xF;
  return static_cast<std::uint8_t>((r << 4) | (l ^ feistel_sbox()[(r ^ k4) & 0xF]));
}

std::vector<Word> feistel_round_table(unsigned k4) {
  std::vector<Word> t(256);
  for (unsigned s = 0; s < 256; ++s) t[s] = feistel_round(static_cast<std::uint8_t>(s), k4);
  return t;
}

std::array<std::uint8_t, 4> toy_aes_reference(const AesKey& key, const std::array<std::uint8_t, 4>& pt) {
  std::array<std::uint8_t, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = aes_sbox()[pt[i] ^ key[i]];
  return out;
}

std::uint8_t toy_des_reference(const FeistelKeys& keys, std::uint8_t pt) {
  for (unsigned k : keys) pt = feistel_round(pt, k);
  return pt;
}

std::string fixture_dir() { return SECURED_FIXTURE_DIR; }

std::string fixture_source(const std::string& name) {
  const std::string path = fixture_dir() + "/" + name + ".s";
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open fixture " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Application load_fixture(const std::string& name) { return build_application(name, fixture_source(name)); }

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"xor_cipher", "toy_aes", "toy_des", "adpcm", "crc"};
  return names;
}

void patch_data(Application& app, const std::string& label, std::span<const Word> words) {
  for (Assembly* a : {&app.plain, &app.instrumented}) {
    const auto base = a->symbols.address_of(label);
    if (!base) throw std::runtime_error("no label " + label + " in " + app.name);
    for (std::size_t k = 0; k < words.size(); ++k) a->image.write(Space::Data, *base + static_cast<Addr>(4 * k), words[k]);
  }
}

std::vector<Word> read_data(const Memory& mem, const Assembly& a, const std::string& label, std::size_t n) {
  const auto base = a.symbols.address_of(label);
  if (!base) throw std::runtime_error("no label " + label);
  std::vector<Word> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = mem.read(*base + static_cast<Addr>(4 * k));
  return out;
}

void set_aes_key(Application& app, const AesKey& key) {
  for (int i = 0; i < 4; ++i) patch_data(app, "aes_t" + std::to_string(i), aes_keyed_table(key[i]));
}

void set_aes_counter(Application& app, const std::array<std::uint8_t, 4>& ctr) {
  const std::vector<Word> w(ctr.begin(), ctr.end());
  patch_data(app, "aes_ctr", w);
  patch_data(app, "aes_pt", w);
}

void set_des_keys(Application& app, const FeistelKeys& keys) {
  for (int i = 0; i < 4; ++i) patch_data(app, "des_g" + std::to_string(i), feistel_round_table(keys[i]));
}

void set_des_plaintext(Application& app, std::span<const std::uint8_t> pt) {
  const std::vector<Word> w(pt.begin(), pt.end());
  patch_data(app, "des_pt", w);
}

}  // namespace secured
