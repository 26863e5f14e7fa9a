#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "secured/sim.hpp"

namespace secured {

const std::array<std::uint8_t, 256>& aes_sbox();
/// Four-bit S-box used by the toy Feistel round function.
const std::array<std::uint8_t, 16>& feistel_sbox();

/// T[j] = S[j ^ k].
std::vector<Word> aes_keyed_table(std::uint8_t k);
/// One round of the toy Feistel network on an 8-bit state.
std::uint8_t feistel_round(std::uint8_t s, unsigned k4);
std::vector<Word> feistel_round_table(unsigned k4);

using AesKey = std::array<std::uint8_t, 4>;
using FeistelKeys = std::array<unsigned, 4>;

/// Expected toy-AES state after the round.
std::array<std::uint8_t, 4> toy_aes_reference(const AesKey& key, const std::array<std::uint8_t, 4>& pt);
std::uint8_t toy_des_reference(const FeistelKeys& keys, std::uint8_t pt);

std::string fixture_dir();
std::string fixture_source(const std::string& name);  // name without ".s"
Application load_fixture(const std::string& name);
/// Workloads of the fixture suite, in a stable order.
const std::vector<std::string>& suite_names();

/// Overwrites data words at `label` in both binaries of `app`.
void patch_data(Application& app, const std::string& label, std::span<const Word> words);
std::vector<Word> read_data(const Memory& mem, const Assembly& a, const std::string& label, std::size_t n);

void set_aes_key(Application& app, const AesKey& key);
/// Counter bytes; the round input equals the counter.
void set_aes_counter(Application& app, const std::array<std::uint8_t, 4>& ctr);
void set_des_keys(Application& app, const FeistelKeys& keys);
void set_des_plaintext(Application& app, std::span<const std::uint8_t> pt);

}  // namespace secured
