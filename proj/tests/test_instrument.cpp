#include <doctest.h>

#include <vector>

#include "secured/instrument.hpp"
#include "secured/workloads.hpp"

using namespace secured;

TEST_CASE("checksum of small blocks") {
  CHECK(compute_checksum(std::vector<Word>{1}).value == 1u);
  // rotl(1) ^ 2 cancels
  CHECK(compute_checksum(std::vector<Word>{1, 2}).value == 0u);
  // the top six bits fold onto the low ones
  CHECK(compute_checksum(std::vector<Word>{0x80000000u}).value == 0x20u);
  CHECK(compute_checksum(std::vector<Word>{0x03FFFFFFu}).value == 0x03FFFFFFu);
  CHECK_THROWS_AS(compute_checksum(std::vector<Word>{}), InstrumentError);
}

TEST_CASE("fold26 keeps every single-bit difference") {
  for (unsigned b = 0; b < 32; ++b) CHECK(fold26(Word{1} << b) != 0u);
  for (Word c : {0u, 0xDEADBEEFu, 0xFFFFFFFFu})
    for (unsigned b = 0; b < 32; ++b) CHECK(fold26(c ^ (Word{1} << b)) != fold26(c));
}

TEST_CASE("block counts of the small fixtures") {
  auto blocks = [](const char* name) {
    const Assembly a = assemble(fixture_source(name));
    return build_cfg(a.image, a.symbols).blocks.size();
  };
  CHECK(blocks("straight") == 1);
  CHECK(blocks("beq_forward") == 3);
  CHECK(blocks("three_block") == 3);
}

TEST_CASE("instrumenting the three-block fixture") {
  const InstrumentedProgram ip = instrument(parse(fixture_source("three_block")));
  REQUIRE(ip.report.size() == 3);
  for (const auto& b : ip.report) {
    const auto blk = ip.cfg.block_starting_at(b.address);
    REQUIRE(blk);
    const BasicBlock& bb = ip.cfg.blocks[*blk];
    REQUIRE(bb.chk);
    CHECK(*bb.chk == b.checksum.value);
    CHECK(bb.size() == b.size);
    // the chk word is not part of its own block
    CHECK(compute_checksum(bb.words) == b.checksum);
  }
  CHECK(report_jsonl(ip.report).find('\n') != std::string::npos);
}

TEST_CASE("fall-through blocks get an explicit jump") {
  const InstrumentedProgram ip = instrument(parse(fixture_source("beq_forward")));
  CHECK(ip.inserted_jumps == 1);
  for (const auto& b : ip.cfg.blocks) CHECK(b.ends_in_cfi());
}

TEST_CASE("unannotated jr is rejected") {
  CHECK_THROWS_AS(instrument(parse(".text\n.org 0x100\nmain: jr r31\n")), InstrumentError);
}

TEST_CASE("balancing markers replace the region labels") {
  const Application des = load_fixture("toy_des");
  REQUIRE(des.regions.size() == 1);
  const Addr begin = *des.plain.symbols.address_of("des_begin");
  const Addr end = *des.plain.symbols.address_of("des_end");
  CHECK(decode(*des.plain.image.read(Space::Instruction, begin))->op == Op::StartBal);
  CHECK(decode(*des.plain.image.read(Space::Instruction, end))->op == Op::EndBal);
}

TEST_CASE("complement image") {
  const Application des = load_fixture("toy_des");
  const MemoryImage c = generate_complement_image(des.plain, des.regions);
  const Addr pt = *des.plain.symbols.address_of("des_pt");
  const Addr g0 = *des.plain.symbols.address_of("des_g0");
  const Word p = *des.plain.image.read(Space::Data, pt);
  CHECK(*c.read(Space::Data, pt) == ~p);
  // T'[j] = NOT T[255 XOR j], byte table
  for (Addr j : {0u, 1u, 77u, 255u})
    CHECK(*c.read(Space::Data, g0 + 4 * j) == (~*des.plain.image.read(Space::Data, g0 + 4 * (255 ^ j)) & 0xFFu));
}
