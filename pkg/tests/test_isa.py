import random

import pytest

from mendasm.isa import (
    Kind,
    decode_at,
    reverse_decode,
    reverse_tree_bfs,
)


def test_jmp_into_itself():
    # eb ff: a jmp whose target lands inside its own encoding
    insn = decode_at(bytes.fromhex("ebff"), 0x401000, 0)
    assert insn.text == "jmp 0x401001"
    assert insn.length == 2
    assert insn.kind == Kind.UNCOND_BRANCH
    assert insn.branch_target == 0x401001


def test_dec_ecx_overlapping_tail():
    insn = decode_at(bytes.fromhex("ebffc9"), 0x401000, 1)
    assert insn.text == "dec ecx"
    assert insn.length == 2
    assert insn.kind == Kind.SEQUENTIAL
    assert insn.branch_target is None


def test_nop_anywhere():
    for base in (0, 0x401000, 2**48):
        insn = decode_at(b"\x90", base, 0)
        assert (insn.text, insn.length, insn.kind) == ("nop", 1, Kind.SEQUENTIAL)
        assert insn.address == base


@pytest.mark.parametrize(
    "hexbytes,addr,text,length",
    [
        ("39c0", 0x401000, "cmp eax, eax", 2),
        ("7403", 0x401002, "je 0x401007", 2),
        ("cc", 0x401005, "int3", 1),
        ("e8b8010000", 0x401006, "call 0x4011c3", 5),
        ("00bf01000000", 0x40100B, "add BYTE PTR [rdi+0x1], bh", 6),
        ("b801000000", 0x401007, "mov eax, 0x1", 5),
        ("bf01000000", 0x40100C, "mov edi, 0x1", 5),
        ("48be0020400000000000", 0x401011, "movabs rsi, 0x402000", 10),
        ("ba0e000000", 0x40101B, "mov edx, 0xe", 5),
        ("0f05", 0x401020, "syscall", 2),
        ("8945f8", 0x401000, "mov DWORD PTR [rbp-0x8], eax", 3),
        ("c745fc08000000", 0x401000, "mov DWORD PTR [rbp-0x4], 0x8", 7),
        ("c745fc17000000", 0x401000, "mov DWORD PTR [rbp-0x4], 0x17", 7),
        ("488d3c2500204000", 0x401000, "lea rdi, ds:0x402000", 8),
        ("8d3c2500204000", 0x401000, "lea edi, ds:0x402000", 7),
        ("b000", 0x401000, "mov al, 0x0", 2),
        ("c9", 0x401000, "leave", 1),
        ("88eb", 0x401000, "mov bl, ch", 2),
        ("00eb", 0x401000, "add bl, ch", 2),
        ("00dd", 0x401000, "add ch, bl", 2),
        ("89c7", 0x401000, "mov edi, eax", 2),
        ("0f8f10000000", 0x401000, "jg 0x401016", 6),
        ("480fc8", 0x401000, "bswap rax", 3),
        ("e2fe", 0x401000, "loop 0x401000", 2),
    ],
)
def test_paper_vectors(hexbytes, addr, text, length):
    # instruction texts appearing in the overlap/fixing/dataset figures
    insn = decode_at(bytes.fromhex(hexbytes), addr, 0)
    assert insn.text == text
    assert insn.length == length


def test_invalid_in_64bit_mode_consumes_one_byte():
    for b in (0x06, 0x17, 0x27, 0x62, 0xD6, 0xEA):
        insn = decode_at(bytes([b, 0x90, 0x90]), 0x1000, 0)
        assert insn.kind == Kind.BAD
        assert insn.text == "(bad)"
        assert insn.length == 1


def test_truncated_encoding_is_bad():
    # call rel32 needs 4 displacement bytes
    insn = decode_at(b"\xe8\x01", 0x1000, 0)
    assert insn.kind == Kind.BAD
    assert insn.length == 1


def test_prefix_overflow_is_bad():
    insn = decode_at(b"\x66" * 20, 0x1000, 0)
    assert insn.kind == Kind.BAD


def test_out_of_range_offset_raises():
    with pytest.raises(ValueError):
        decode_at(b"\x90", 0x1000, 1)
    with pytest.raises(ValueError):
        decode_at(b"\x90", 0x1000, -1)


def test_decode_is_pure():
    data = bytes(range(256)) * 2
    for off in range(0, 256, 7):
        a = decode_at(data, 0x400000, off)
        b = decode_at(data, 0x400000, off)
        assert a == b


def test_branch_target_only_for_direct_flow():
    insn = decode_at(bytes.fromhex("ffd0"), 0x1000, 0)  # call rax
    assert insn.kind == Kind.CALL
    assert insn.branch_target is None
    insn = decode_at(bytes.fromhex("ffe0"), 0x1000, 0)  # jmp rax
    assert insn.kind == Kind.UNCOND_BRANCH
    assert insn.branch_target is None


def test_immediates_track_wide_constants_only():
    insn = decode_at(bytes.fromhex("b844302010"), 0x1000, 0)  # mov eax, imm32
    assert insn.immediates == (0x10203044,)
    insn = decode_at(bytes.fromhex("83c001"), 0x1000, 0)  # add eax, imm8
    assert insn.immediates == ()
    insn = decode_at(bytes.fromhex("6a10"), 0x1000, 0)  # push imm8
    assert insn.immediates == ()


def test_reverse_decode_nops():
    data = b"\x90\x90\x90"
    base = 0x2000
    result = reverse_decode(data, base, base + 3)
    assert [(i.address, i.text) for i in result] == [(base + 2, "nop")]


def test_reverse_decode_empty_window():
    assert reverse_decode(b"\x90\x90", 0x2000, 0x2000) == []


def test_reverse_decode_overlap_example():
    data = bytes.fromhex("ebffc9")
    base = 0x401000
    result = reverse_decode(data, base, base + 3)
    pairs = [(i.address, i.text) for i in result]
    assert (base + 1, "dec ecx") in pairs
    # ascending start order
    assert [i.address for i in result] == sorted(i.address for i in result)


def test_reverse_decode_respects_excluded():
    data = bytes.fromhex("ebffc9")
    base = 0x401000
    result = reverse_decode(data, base, base + 3, excluded={base + 1})
    assert all(i.address != base + 1 for i in result)


def _reverse_oracle(data, base, end, excluded=frozenset()):
    # brute force: try every window length, keep exact-end decodes
    found = []
    for k in range(1, 16):
        off = end - base - k
        if off < 0 or off >= len(data) or base + off in excluded:
            continue
        insn = decode_at(data, base, off)
        if insn.length == k:
            found.append(insn)
    return sorted(found, key=lambda i: i.address)


def test_reverse_decode_matches_oracle_on_random_windows():
    rng = random.Random(0xD15A)
    base = 0x400000
    for _ in range(1000):
        data = bytes(rng.randrange(256) for _ in range(64))
        end = base + rng.randrange(1, 65)
        assert reverse_decode(data, base, end) == _reverse_oracle(data, base, end)


def test_reverse_decode_end_invariant():
    rng = random.Random(7)
    base = 0x400000
    for _ in range(200):
        data = bytes(rng.randrange(256) for _ in range(32))
        end = base + rng.randrange(1, 33)
        for insn in reverse_decode(data, base, end):
            assert insn.address + insn.length == end


def test_reverse_tree_bfs_nops():
    data = b"\x90\x90\x90"
    base = 0x3000
    result = reverse_tree_bfs(data, base, base + 3, limit=16)
    assert [i.address for i in result] == [base + 2, base + 1, base + 0]
    assert all(i.text == "nop" for i in result)


def test_reverse_tree_bfs_limit_one():
    data = b"\x90\x90\x90"
    base = 0x3000
    result = reverse_tree_bfs(data, base, base + 3, limit=1)
    assert len(result) == 1
    assert result[0].address == base + 2


def test_reverse_tree_bfs_no_predecessors():
    # e8: lone truncated call byte never ends anything at offset 1
    assert reverse_tree_bfs(b"\xe8\x90", 0x3000, 0x3000, limit=4) == []
