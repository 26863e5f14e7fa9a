#include <doctest.h>

#include "secured/workloads.hpp"

using namespace secured;

TEST_CASE("disassembly reassembles to the same code") {
  for (const auto& name : {"straight", "three_block", "beq_forward", "crc", "adpcm", "toy_des"}) {
    const Assembly a = assemble(fixture_source(name));
    const Assembly b = assemble(disassemble(a.image));
    CHECK_MESSAGE(b.image.code_words() == a.image.code_words(), name);
  }
}

TEST_CASE("assembly errors carry the line") {
  try {
    assemble(".text\n.org 0x100\nmain: addi r1, r0\n");
    FAIL("no error");
  } catch (const AssemblyError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(assemble(".text\nmain: j nowhere\n"), AssemblyError);
  CHECK_THROWS_AS(assemble(".text\nmain: addi r1, r0, 70000\n"), AssemblyError);
}

TEST_CASE("image text round-trip") {
  const Assembly a = assemble(fixture_source("toy_aes"));
  const MemoryImage back = read_image(write_image(a.image));
  CHECK(back == a.image);
}

TEST_CASE("labels and data") {
  const Assembly a = assemble(fixture_source("straight"));
  CHECK(a.symbols.address_of("main") == 0x100u);
  CHECK(a.symbols.address_of("result") == 0x7000u);
  CHECK(a.image.entry() == 0x100u);
  CHECK_FALSE(a.symbols.address_of("nope"));
}
