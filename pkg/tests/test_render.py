import pytest

from mendasm.graph import Block
from mendasm.initial import CodeRegion, initial_disassemble
from mendasm.isa import decode_at
from mendasm.render import Snippet, render_blocks, render_gap_byte

from test_initial import LISTING_BYTES

LISTING_LEFT = """\
0x401000:
cmp eax, eax
je 0x401007
; 0x401004

<<<<<<<
0x401004:
nop
int3
call 0x4011c3
add BYTE PTR [rdi+0x1], bh
; 0x401011
=======
0x401007:
mov eax, 0x1
mov edi, 0x1
; 0x401011
>>>>>>>

0x401011:
movabs rsi, 0x402000
mov edx, 0xe
syscall
; 0x401022
"""

LISTING_RIGHT = """\
0x401000:
cmp eax, eax
je 0x401007
nop
int3
; 0x401006

<<<<<<<
0x401006:
call 0x4011c3
add BYTE PTR [rdi+0x1], bh
; 0x401011
=======
0x401007:
mov eax, 0x1
mov edi, 0x1
; 0x401011
>>>>>>>

0x401011:
movabs rsi, 0x402000
mov edx, 0xe
syscall
; 0x401022
"""


def _render_graph(graph):
    blocks = graph.sorted_blocks()
    refs = set()
    for b in blocks:
        for i in b.instructions:
            if i.branch_target is not None:
                refs.add(i.branch_target)
            refs.update(i.immediates)
    return render_blocks(blocks, refs=refs)


def test_overlap_listing_before_minimization():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    assert _render_graph(g).text == LISTING_LEFT


def test_overlap_listing_after_minimization():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    g.minimize_overlap()
    assert _render_graph(g).text == LISTING_RIGHT


def test_gap_byte_lines():
    assert render_gap_byte(0x500, 0x89) == "db 0x89"
    assert render_gap_byte(0x501, 0xA9) == "db 0xA9"
    assert render_gap_byte(0x502, 0x00) == "db 0x00"


def test_single_block_plain_region():
    block = Block([decode_at(b"\x90\x90\xc3", 0x2000, 0),
                   decode_at(b"\x90\x90\xc3", 0x2000, 1),
                   decode_at(b"\x90\x90\xc3", 0x2000, 2)])
    snippet = render_blocks([block])
    assert snippet.text == "0x2000:\nnop\nnop\nret\n; 0x2003\n"
    assert snippet.word_spans == ()


def test_annotated_and_queried_instruction():
    data = b"\x90\x50\xc3"
    block = Block([decode_at(data, 0x2000, i) for i in range(3)])
    snippet = render_blocks(
        [block],
        annotations={0x2000: "valid", 0x2002: "invalid"},
        queried={0x2001},
    )
    assert snippet.text == (
        "0x2000:\nnop ; valid\npush rax\nret ; invalid\n; 0x2003\n")
    (span,) = snippet.word_spans
    assert span.address == 0x2001
    assert snippet.text[span.start:span.end] == "push rax"


def test_queried_span_excludes_annotation():
    block = Block([decode_at(b"\x90", 0x2000, 0)])
    snippet = render_blocks([block], annotations={0x2000: "valid"},
                            queried={0x2000})
    (span,) = snippet.word_spans
    assert snippet.text[span.start:span.end] == "nop"


def test_adjacent_blocks_merge_into_one_region():
    a = Block([decode_at(b"\x90", 0x2000, 0)])
    b = Block([decode_at(b"\xc3", 0x2001, 0)])
    snippet = render_blocks([a, b])
    assert snippet.text == "0x2000:\nnop\nret\n; 0x2002\n"


def test_referenced_interior_block_gets_label():
    a = Block([decode_at(b"\x90", 0x2000, 0)])
    b = Block([decode_at(b"\xc3", 0x2001, 0)])
    snippet = render_blocks([a, b], refs={0x2001})
    assert snippet.text == "0x2000:\nnop\n0x2001:\nret\n; 0x2002\n"


def test_gap_between_blocks_makes_two_regions():
    a = Block([decode_at(b"\x90", 0x2000, 0)])
    b = Block([decode_at(b"\xc3", 0x2005, 0)])
    snippet = render_blocks([a, b])
    assert snippet.text == "0x2000:\nnop\n; 0x2001\n\n0x2005:\nret\n; 0x2006\n"


def test_unsorted_blocks_rejected():
    a = Block([decode_at(b"\x90", 0x2000, 0)])
    b = Block([decode_at(b"\xc3", 0x2005, 0)])
    with pytest.raises(ValueError):
        render_blocks([b, a])


def test_conflict_markers_iff_transitive_overlap():
    data = bytes.fromhex("ebffc9")
    jmp = Block([decode_at(data, 0x1000, 0)])
    dec = Block([decode_at(data, 0x1000, 1)])
    with_overlap = render_blocks([jmp, dec])
    assert "<<<<<<<" in with_overlap.text
    assert with_overlap.text.count("=======") == 1
    alone = render_blocks([jmp])
    assert "<<<<<<<" not in alone.text


def test_rendering_is_pure():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    assert _render_graph(g).text == _render_graph(g).text


def test_round_trip_labels_parse_back():
    g = initial_disassemble(CodeRegion(0x401000, LISTING_BYTES, []))
    snippet = _render_graph(g)
    starts = set()
    for line in snippet.text.splitlines():
        if line.endswith(":") and line.startswith("0x"):
            starts.add(int(line[:-1], 16))
    assert starts == set(g.blocks)
