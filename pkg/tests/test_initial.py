import pytest

from mendasm.graph import EdgeKind
from mendasm.initial import CodeRegion, initial_disassemble

# The overlap-minimization walkthrough bytes: an always-taken je over two junk
# bytes, with the junk stream decoding a call whose immediate tail doubles as
# the real mov eax instruction.
LISTING_BYTES = bytes.fromhex(
    "39c0"                  # 0x401000 cmp eax, eax
    "7403"                  # 0x401002 je 0x401007
    "90"                    # 0x401004 nop        (junk)
    "cc"                    # 0x401005 int3       (junk)
    "e8b8010000"            # 0x401006 call 0x4011c3   / tail = mov eax, 0x1
    "00bf01000000"          # 0x40100b add BYTE PTR [rdi+0x1], bh / tail = mov edi, 0x1
    "48be0020400000000000"  # 0x401011 movabs rsi, 0x402000
    "ba0e000000"            # 0x40101b mov edx, 0xe
    "0f05"                  # 0x401020 syscall
)


def test_nop_run_single_block():
    region = CodeRegion(0x1000, b"\x90" * 7, [])
    g = initial_disassemble(region)
    assert sorted(g.blocks) == [0x1000]
    assert len(g.blocks[0x1000].instructions) == 7
    assert g.edges() == []


def test_conditional_branch_shape():
    # cmp eax, eax; je +3; nop; nop; nop -> target block plus fallthrough
    data = bytes.fromhex("39c0" "7403" "909090" "9090")
    g = initial_disassemble(CodeRegion(0x401000, data, []))
    starts = sorted(g.blocks)
    assert starts[0] == 0x401000
    assert 0x401007 in starts  # branch target
    assert 0x401004 in starts  # fallthrough
    kinds = {(e.src, e.dst): e.kind for e in g.edges()}
    assert kinds[(0x401000, 0x401007)] == EdgeKind.CONTROL_FLOW
    assert kinds[(0x401000, 0x401004)] == EdgeKind.CONTROL_FLOW


def test_jmp_end_address_is_linear_candidate():
    # jmp +2; cc; nop nop: the byte after the jmp is decoded speculatively
    data = bytes.fromhex("eb02" "cc" "90" "90")
    g = initial_disassemble(CodeRegion(0x1000, data, []))
    assert 0x1002 in g.blocks
    kinds = {(e.src, e.dst): e.kind for e in g.edges()}
    assert kinds[(0x1000, 0x1002)] == EdgeKind.FALLTHROUGH_AFTER_BRANCH
    assert kinds[(0x1000, 0x1004)] == EdgeKind.CONTROL_FLOW  # jmp target


def test_immediate_operand_tracked():
    # mov eax, 0x100a; ret; ...; target nops at 0x100a
    data = bytes.fromhex("b80a100000" "c3" "90909090" "9090")
    g = initial_disassemble(CodeRegion(0x1000, data, []))
    assert 0x100A in g.blocks
    kinds = {(e.src, e.dst): e.kind for e in g.edges()}
    assert kinds[(0x1000, 0x100A)] == EdgeKind.IMMEDIATE


def test_invalid_encoding_terminates_and_continues():
    # 0x06 is invalid in 64-bit mode; sweep continues at the next byte
    data = bytes.fromhex("06" "90" "90")
    g = initial_disassemble(CodeRegion(0x1000, data, []))
    bad_block = g.blocks[0x1000]
    assert bad_block.instructions[0].text == "(bad)"
    assert 0x1001 in g.blocks
    kinds = {(e.src, e.dst): e.kind for e in g.edges()}
    assert kinds[(0x1000, 0x1001)] == EdgeKind.FALLTHROUGH_AFTER_BRANCH


def test_listing_walkthrough_blocks():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    spans = {(b.start, b.end) for b in g.sorted_blocks()}
    assert spans == {
        (0x401000, 0x401004),   # cmp, je
        (0x401004, 0x401011),   # nop, int3, call, add (junk stream)
        (0x401007, 0x401011),   # mov eax, mov edi (real stream)
        (0x401011, 0x401022),   # movabs, mov, syscall
    }
    texts = [i.text for i in g.blocks[0x401007].instructions]
    assert texts == ["mov eax, 0x1", "mov edi, 0x1"]


def test_listing_walkthrough_streams_reconverge():
    # one desynchronizing junk byte: decode re-converges to the true stream
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    truth = {0x401000, 0x401002, 0x401007, 0x40100C, 0x401011, 0x40101B, 0x401020}
    decoded = {i.address for i in g.instructions()}
    assert truth <= decoded


def test_each_address_decoded_once():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    addrs = [i.address for i in g.instructions()]
    assert len(addrs) == len(set(addrs))


def test_entry_points_seed_blocks():
    data = b"\x90" * 4 + b"\xc3" + b"\x90\x90\xc3"
    g = initial_disassemble(CodeRegion(0x1000, data, [0x1005]))
    assert 0x1005 in g.blocks


def test_entry_point_out_of_region_rejected():
    with pytest.raises(ValueError):
        CodeRegion(0x1000, b"\x90", [0x2000])


def test_empty_region_rejected():
    with pytest.raises(ValueError):
        initial_disassemble(CodeRegion(0x1000, b"", []))
