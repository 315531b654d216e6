"""x86-64 instruction decoding.

A deterministic, self-contained decoder for 64-bit mode covering the one-byte
opcode map (minus rarities) and the common 0F opcodes. Anything outside the
tables decodes to an ``(bad)`` marker consuming exactly one byte, which keeps
linear sweeps total. Rendering follows objdump-style Intel syntax
(``mov DWORD PTR [rbp-0x4], 0x8``, ``lea rdi, ds:0x402000``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

MAX_INSN_LEN = 15

MASK64 = (1 << 64) - 1


class Kind(enum.Enum):
    SEQUENTIAL = "sequential"
    COND_BRANCH = "conditional-branch"
    UNCOND_BRANCH = "unconditional-branch"
    CALL = "call"
    RETURN = "return"
    HALT = "halt"
    BAD = "invalid-encoding"


# Kinds that terminate a basic block. call and int3 fall through and keep the
# block going, matching how overlapped regions are displayed.
BLOCK_TERMINATORS = frozenset(
    {Kind.COND_BRANCH, Kind.UNCOND_BRANCH, Kind.RETURN, Kind.HALT, Kind.BAD}
)


@dataclass(frozen=True)
class Instruction:
    address: int
    length: int
    text: str
    kind: Kind
    branch_target: int | None = None
    immediates: tuple[int, ...] = ()

    @property
    def end(self) -> int:
        return self.address + self.length

    def __str__(self) -> str:  # debugging aid
        return f"{self.address:#x}: {self.text}"


class _Undecodable(Exception):
    """Raised internally for any encoding outside the supported subset."""


REG64 = ["rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
         "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15"]
REG32 = ["eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
         "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"]
REG16 = ["ax", "cx", "dx", "bx", "sp", "bp", "si", "di",
         "r8w", "r9w", "r10w", "r11w", "r12w", "r13w", "r14w", "r15w"]
REG8_REX = ["al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil",
            "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"]
REG8_LEGACY = ["al", "cl", "dl", "bl", "ah", "ch", "dh", "bh"]

_CC_NAMES = ["o", "no", "b", "ae", "e", "ne", "be", "a",
             "s", "ns", "p", "np", "l", "ge", "le", "g"]

_ALU_OPS = ["add", "or", "adc", "sbb", "and", "sub", "xor", "cmp"]
_SHIFT_OPS = ["rol", "ror", "rcl", "rcr", "shl", "shr", "shl", "sar"]

_LEGACY_PREFIXES = {0x26, 0x2E, 0x36, 0x3E, 0x64, 0x65, 0x66, 0x67,
                    0xF0, 0xF2, 0xF3}

# One-byte opcodes that are invalid in 64-bit mode (plus VEX prefixes, which
# this subset does not decode).
_INVALID_64 = {0x06, 0x07, 0x0E, 0x16, 0x17, 0x1E, 0x1F, 0x27, 0x2F, 0x37,
               0x3F, 0x60, 0x61, 0x62, 0x82, 0x9A, 0xC4, 0xC5, 0xD4, 0xD5,
               0xD6, 0xEA}


class _Reader:
    __slots__ = ("data", "start", "pos", "limit")

    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.start = offset
        self.pos = offset
        self.limit = min(len(data), offset + MAX_INSN_LEN)

    def u8(self) -> int:
        if self.pos >= self.limit:
            raise _Undecodable
        b = self.data[self.pos]
        self.pos += 1
        return b

    def peek(self) -> int:
        if self.pos >= self.limit:
            raise _Undecodable
        return self.data[self.pos]

    def bytes_le(self, n: int) -> int:
        if self.pos + n > self.limit:
            raise _Undecodable
        v = int.from_bytes(self.data[self.pos:self.pos + n], "little")
        self.pos += n
        return v

    @property
    def length(self) -> int:
        return self.pos - self.start


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value ^ sign) - sign


def _reg(size: int, idx: int, rex: int) -> str:
    if size == 8:
        return REG8_REX[idx] if rex else REG8_LEGACY[idx]
    if size == 16:
        return REG16[idx]
    if size == 32:
        return REG32[idx]
    return REG64[idx]


_PTR = {8: "BYTE PTR ", 16: "WORD PTR ", 32: "DWORD PTR ", 64: "QWORD PTR "}


def _disp_str(disp: int) -> str:
    if disp < 0:
        return f"-{-disp:#x}"
    return f"+{disp:#x}"


class _Decoder:
    def __init__(self, data: bytes, base: int, offset: int):
        self.r = _Reader(data, offset)
        self.base = base
        self.address = base + offset
        self.rex = 0
        self.opsize16 = False
        self.addr32 = False
        self.seg: str | None = None
        self.rep: int | None = None
        self.lock = False
        self.target: int | None = None
        self.imms: list[int] = []
        self.kind = Kind.SEQUENTIAL

    # -- prefix / field helpers -------------------------------------------

    def prefixes(self) -> int:
        while True:
            b = self.r.u8()
            if b in _LEGACY_PREFIXES:
                self.rex = 0
                if b == 0x66:
                    self.opsize16 = True
                elif b == 0x67:
                    self.addr32 = True
                elif b == 0x64:
                    self.seg = "fs"
                elif b == 0x65:
                    self.seg = "gs"
                elif b == 0xF0:
                    self.lock = True
                elif b in (0xF2, 0xF3):
                    self.rep = b
                # 26/2e/36/3e are ignored in 64-bit mode
            elif 0x40 <= b <= 0x4F:
                self.rex = b
            else:
                return b

    @property
    def rexw(self) -> bool:
        return bool(self.rex & 8)

    def opsize(self) -> int:
        if self.rexw:
            return 64
        if self.opsize16:
            return 16
        return 32

    def modrm(self) -> tuple[int, int, int]:
        m = self.r.u8()
        return m >> 6, (m >> 3) & 7, m & 7

    def reg_op(self, size: int, reg: int) -> str:
        return _reg(size, reg | ((self.rex & 4) << 1), self.rex)

    def rm_op(self, size: int, mod: int, rm: int, ptr: bool = True) -> str:
        if mod == 3:
            return _reg(size, rm | ((self.rex & 1) << 3), self.rex)
        return self.mem_op(size, mod, rm, ptr)

    def mem_op(self, size: int, mod: int, rm: int, ptr: bool = True) -> str:
        names = REG32 if self.addr32 else REG64
        prefix = _PTR[size] if ptr else ""
        seg = f"{self.seg}:" if self.seg else ""
        if rm == 4:
            sib = self.r.u8()
            scale = 1 << (sib >> 6)
            index_idx = ((sib >> 3) & 7) | ((self.rex & 2) << 2)
            base_idx = (sib & 7) | ((self.rex & 1) << 3)
            has_index = index_idx != 4  # index 100 without REX.X means none
            if (sib & 7) == 5 and mod == 0:
                disp = _sext(self.r.bytes_le(4), 32)
                if not has_index:
                    seg = seg or "ds:"
                    return f"{prefix}{seg}{disp & 0xFFFFFFFF:#x}"
                return (f"{prefix}{seg}[{names[index_idx]}*{scale}"
                        f"{_disp_str(disp)}]")
            parts = names[base_idx]
            if has_index:
                parts += f"+{names[index_idx]}*{scale}"
            if mod == 1:
                parts += _disp_str(_sext(self.r.u8(), 8))
            elif mod == 2:
                parts += _disp_str(_sext(self.r.bytes_le(4), 32))
            return f"{prefix}{seg}[{parts}]"
        if mod == 0 and rm == 5:
            disp = _sext(self.r.bytes_le(4), 32)
            return f"{prefix}{seg}[rip{_disp_str(disp)}]"
        reg_name = names[rm | ((self.rex & 1) << 3)]
        if mod == 0:
            return f"{prefix}{seg}[{reg_name}]"
        if mod == 1:
            disp = _sext(self.r.u8(), 8)
        else:
            disp = _sext(self.r.bytes_le(4), 32)
        return f"{prefix}{seg}[{reg_name}{_disp_str(disp)}]"

    # -- immediates ---------------------------------------------------------

    def imm(self, nbytes: int, opsize: int) -> int:
        """Read an immediate; widths >= 2 bytes are tracked as constants."""
        raw = self.r.bytes_le(nbytes)
        value = _sext(raw, nbytes * 8) & ((1 << opsize) - 1)
        if nbytes >= 2:
            self.imms.append(value)
        return value

    def imm_z(self, opsize: int) -> int:
        return self.imm(2 if opsize == 16 else 4, opsize)

    def rel(self, nbytes: int) -> int:
        disp = _sext(self.r.bytes_le(nbytes), nbytes * 8)
        # target is computed from the instruction end
        return (self.address + self.r.length + disp) & MASK64

    # -- opcode dispatch ----------------------------------------------------

    def decode(self) -> tuple[str, Kind]:
        op = self.prefixes()
        if op in _INVALID_64:
            raise _Undecodable

        # ALU block 00-3D: add/or/adc/sbb/and/sub/xor/cmp
        if op < 0x40 and (op & 7) < 6:
            name = _ALU_OPS[op >> 3]
            form = op & 7
            if form == 0:
                mod, reg, rm = self.modrm()
                return f"{name} {self.rm_op(8, mod, rm)}, {self.reg_op(8, reg)}", Kind.SEQUENTIAL
            if form == 1:
                size = self.opsize()
                mod, reg, rm = self.modrm()
                return f"{name} {self.rm_op(size, mod, rm)}, {self.reg_op(size, reg)}", Kind.SEQUENTIAL
            if form == 2:
                mod, reg, rm = self.modrm()
                return f"{name} {self.reg_op(8, reg)}, {self.rm_op(8, mod, rm)}", Kind.SEQUENTIAL
            if form == 3:
                size = self.opsize()
                mod, reg, rm = self.modrm()
                return f"{name} {self.reg_op(size, reg)}, {self.rm_op(size, mod, rm)}", Kind.SEQUENTIAL
            if form == 4:
                return f"{name} al, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
            size = self.opsize()
            acc = _reg(size, 0, self.rex)
            return f"{name} {acc}, {self.imm_z(size):#x}", Kind.SEQUENTIAL

        if 0x50 <= op <= 0x57:
            return f"push {REG64[(op & 7) | ((self.rex & 1) << 3)]}", Kind.SEQUENTIAL
        if 0x58 <= op <= 0x5F:
            return f"pop {REG64[(op & 7) | ((self.rex & 1) << 3)]}", Kind.SEQUENTIAL
        if op == 0x63:
            mod, reg, rm = self.modrm()
            return f"movsxd {self.reg_op(64 if self.rexw else 32, reg)}, {self.rm_op(32, mod, rm)}", Kind.SEQUENTIAL
        if op == 0x68:
            value = self.imm(2, 16) if self.opsize16 else self.imm(4, 64)
            return f"push {value:#x}", Kind.SEQUENTIAL
        if op == 0x69:
            size = self.opsize()
            mod, reg, rm = self.modrm()
            dst = self.reg_op(size, reg)
            src = self.rm_op(size, mod, rm)
            return f"imul {dst}, {src}, {self.imm_z(size):#x}", Kind.SEQUENTIAL
        if op == 0x6A:
            return f"push {self.imm(1, 64):#x}", Kind.SEQUENTIAL
        if op == 0x6B:
            size = self.opsize()
            mod, reg, rm = self.modrm()
            dst = self.reg_op(size, reg)
            src = self.rm_op(size, mod, rm)
            return f"imul {dst}, {src}, {self.imm(1, size):#x}", Kind.SEQUENTIAL

        if 0x70 <= op <= 0x7F:
            self.target = self.rel(1)
            return f"j{_CC_NAMES[op & 0xF]} {self.target:#x}", Kind.COND_BRANCH

        if op in (0x80, 0x81, 0x83):
            mod, reg, rm = self.modrm()
            name = _ALU_OPS[reg]
            if op == 0x80:
                dst = self.rm_op(8, mod, rm)
                return f"{name} {dst}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
            size = self.opsize()
            dst = self.rm_op(size, mod, rm)
            if op == 0x81:
                return f"{name} {dst}, {self.imm_z(size):#x}", Kind.SEQUENTIAL
            return f"{name} {dst}, {self.imm(1, size):#x}", Kind.SEQUENTIAL

        if op in (0x84, 0x85):
            size = 8 if op == 0x84 else self.opsize()
            mod, reg, rm = self.modrm()
            return f"test {self.rm_op(size, mod, rm)}, {self.reg_op(size, reg)}", Kind.SEQUENTIAL
        if op in (0x86, 0x87):
            size = 8 if op == 0x86 else self.opsize()
            mod, reg, rm = self.modrm()
            return f"xchg {self.rm_op(size, mod, rm)}, {self.reg_op(size, reg)}", Kind.SEQUENTIAL

        if 0x88 <= op <= 0x8B:
            size = 8 if op in (0x88, 0x8A) else self.opsize()
            mod, reg, rm = self.modrm()
            r_op = self.reg_op(size, reg)
            rm_s = self.rm_op(size, mod, rm)
            if op in (0x88, 0x89):
                return f"mov {rm_s}, {r_op}", Kind.SEQUENTIAL
            return f"mov {r_op}, {rm_s}", Kind.SEQUENTIAL

        if op == 0x8D:
            mod, reg, rm = self.modrm()
            if mod == 3:
                raise _Undecodable
            return f"lea {self.reg_op(self.opsize(), reg)}, {self.mem_op(0, mod, rm, ptr=False)}", Kind.SEQUENTIAL
        if op == 0x8F:
            mod, reg, rm = self.modrm()
            if reg != 0:
                raise _Undecodable
            return f"pop {self.rm_op(64, mod, rm)}", Kind.SEQUENTIAL

        if op == 0x90:
            if self.rep == 0xF3:
                return "pause", Kind.SEQUENTIAL
            if self.rex & 1:
                size = self.opsize()
                return f"xchg {_reg(size, 8, self.rex)}, {_reg(size, 0, self.rex)}", Kind.SEQUENTIAL
            return "nop", Kind.SEQUENTIAL
        if 0x91 <= op <= 0x97:
            size = self.opsize()
            acc = _reg(size, 0, self.rex)
            return f"xchg {_reg(size, (op & 7) | ((self.rex & 1) << 3), self.rex)}, {acc}", Kind.SEQUENTIAL

        if op == 0x98:
            return {16: "cbw", 32: "cwde", 64: "cdqe"}[self.opsize()], Kind.SEQUENTIAL
        if op == 0x99:
            return {16: "cwd", 32: "cdq", 64: "cqo"}[self.opsize()], Kind.SEQUENTIAL
        if op == 0x9C:
            return "pushf", Kind.SEQUENTIAL
        if op == 0x9D:
            return "popf", Kind.SEQUENTIAL
        if op == 0x9E:
            return "sahf", Kind.SEQUENTIAL
        if op == 0x9F:
            return "lahf", Kind.SEQUENTIAL

        if 0xA0 <= op <= 0xA3:
            moffs = self.r.bytes_le(4 if self.addr32 else 8)
            size = 8 if op in (0xA0, 0xA2) else self.opsize()
            acc = _reg(size, 0, self.rex)
            seg = f"{self.seg}:" if self.seg else "ds:"
            if op in (0xA0, 0xA1):
                return f"mov {acc}, {seg}{moffs:#x}", Kind.SEQUENTIAL
            return f"mov {seg}{moffs:#x}, {acc}", Kind.SEQUENTIAL

        if op in (0xA4, 0xA5, 0xA6, 0xA7, 0xAA, 0xAB, 0xAC, 0xAD, 0xAE, 0xAF):
            stem = {0xA4: "movs", 0xA6: "cmps", 0xAA: "stos",
                    0xAC: "lods", 0xAE: "scas"}[op & ~1]
            if op & 1:
                suffix = {16: "w", 32: "d", 64: "q"}[self.opsize()]
            else:
                suffix = "b"
            text = stem + suffix
            if self.rep == 0xF3:
                text = ("repz " if stem in ("cmps", "scas") else "rep ") + text
            elif self.rep == 0xF2:
                text = "repnz " + text
            return text, Kind.SEQUENTIAL

        if op == 0xA8:
            return f"test al, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
        if op == 0xA9:
            size = self.opsize()
            return f"test {_reg(size, 0, self.rex)}, {self.imm_z(size):#x}", Kind.SEQUENTIAL

        if 0xB0 <= op <= 0xB7:
            reg = (op & 7) | ((self.rex & 1) << 3)
            return f"mov {_reg(8, reg, self.rex)}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
        if 0xB8 <= op <= 0xBF:
            size = self.opsize()
            reg = (op & 7) | ((self.rex & 1) << 3)
            if size == 64:
                return f"movabs {REG64[reg]}, {self.imm(8, 64):#x}", Kind.SEQUENTIAL
            return f"mov {_reg(size, reg, self.rex)}, {self.imm_z(size):#x}", Kind.SEQUENTIAL

        if op in (0xC0, 0xC1):
            size = 8 if op == 0xC0 else self.opsize()
            mod, reg, rm = self.modrm()
            dst = self.rm_op(size, mod, rm)
            return f"{_SHIFT_OPS[reg]} {dst}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
        if op == 0xC2:
            return f"ret {self.imm(2, 16):#x}", Kind.RETURN
        if op == 0xC3:
            return "ret", Kind.RETURN
        if op in (0xC6, 0xC7):
            mod, reg, rm = self.modrm()
            if reg != 0:
                raise _Undecodable
            if op == 0xC6:
                dst = self.rm_op(8, mod, rm)
                return f"mov {dst}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
            size = self.opsize()
            dst = self.rm_op(size, mod, rm)
            return f"mov {dst}, {self.imm_z(size):#x}", Kind.SEQUENTIAL
        if op == 0xC8:
            frame = self.imm(2, 16)
            return f"enter {frame:#x}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
        if op == 0xC9:
            return "leave", Kind.SEQUENTIAL
        if op == 0xCC:
            return "int3", Kind.SEQUENTIAL
        if op == 0xCD:
            return f"int {self.imm(1, 8):#x}", Kind.SEQUENTIAL

        if 0xD0 <= op <= 0xD3:
            size = 8 if op in (0xD0, 0xD2) else self.opsize()
            mod, reg, rm = self.modrm()
            dst = self.rm_op(size, mod, rm)
            count = "1" if op in (0xD0, 0xD1) else "cl"
            return f"{_SHIFT_OPS[reg]} {dst}, {count}", Kind.SEQUENTIAL
        if op == 0xD7:
            return "xlat", Kind.SEQUENTIAL

        if 0xE0 <= op <= 0xE3:
            self.target = self.rel(1)
            name = {0xE0: "loopne", 0xE1: "loope", 0xE2: "loop", 0xE3: "jrcxz"}[op]
            return f"{name} {self.target:#x}", Kind.COND_BRANCH

        if op in (0xE4, 0xE5):
            acc = "al" if op == 0xE4 else _reg(self.opsize(), 0, 0)
            return f"in {acc}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
        if op in (0xE6, 0xE7):
            acc = "al" if op == 0xE6 else _reg(self.opsize(), 0, 0)
            return f"out {self.imm(1, 8):#x}, {acc}", Kind.SEQUENTIAL
        if op in (0xEC, 0xED):
            acc = "al" if op == 0xEC else _reg(self.opsize(), 0, 0)
            return f"in {acc}, dx", Kind.SEQUENTIAL
        if op in (0xEE, 0xEF):
            acc = "al" if op == 0xEE else _reg(self.opsize(), 0, 0)
            return f"out dx, {acc}", Kind.SEQUENTIAL

        if op == 0xE8:
            self.target = self.rel(4)
            return f"call {self.target:#x}", Kind.CALL
        if op == 0xE9:
            self.target = self.rel(4)
            return f"jmp {self.target:#x}", Kind.UNCOND_BRANCH
        if op == 0xEB:
            self.target = self.rel(1)
            return f"jmp {self.target:#x}", Kind.UNCOND_BRANCH

        if op == 0xF1:
            return "int1", Kind.SEQUENTIAL
        if op == 0xF4:
            return "hlt", Kind.HALT
        if op == 0xF5:
            return "cmc", Kind.SEQUENTIAL
        if op in (0xF6, 0xF7):
            size = 8 if op == 0xF6 else self.opsize()
            mod, reg, rm = self.modrm()
            dst = self.rm_op(size, mod, rm)
            if reg in (0, 1):
                if op == 0xF6:
                    return f"test {dst}, {self.imm(1, 8):#x}", Kind.SEQUENTIAL
                return f"test {dst}, {self.imm_z(size):#x}", Kind.SEQUENTIAL
            name = ["test", "test", "not", "neg", "mul", "imul", "div", "idiv"][reg]
            return f"{name} {dst}", Kind.SEQUENTIAL
        if op == 0xF8:
            return "clc", Kind.SEQUENTIAL
        if op == 0xF9:
            return "stc", Kind.SEQUENTIAL
        if op == 0xFA:
            return "cli", Kind.SEQUENTIAL
        if op == 0xFB:
            return "sti", Kind.SEQUENTIAL
        if op == 0xFC:
            return "cld", Kind.SEQUENTIAL
        if op == 0xFD:
            return "std", Kind.SEQUENTIAL
        if op == 0xFE:
            mod, reg, rm = self.modrm()
            if reg > 1:
                raise _Undecodable
            return f"{'inc' if reg == 0 else 'dec'} {self.rm_op(8, mod, rm)}", Kind.SEQUENTIAL
        if op == 0xFF:
            mod, reg, rm = self.modrm()
            if reg in (0, 1):
                size = self.opsize()
                return f"{'inc' if reg == 0 else 'dec'} {self.rm_op(size, mod, rm)}", Kind.SEQUENTIAL
            if reg == 2:
                return f"call {self.rm_op(64, mod, rm)}", Kind.CALL
            if reg == 4:
                return f"jmp {self.rm_op(64, mod, rm)}", Kind.UNCOND_BRANCH
            if reg == 6:
                return f"push {self.rm_op(64, mod, rm)}", Kind.SEQUENTIAL
            raise _Undecodable

        if op == 0x0F:
            return self.decode_0f()
        raise _Undecodable

    def decode_0f(self) -> tuple[str, Kind]:
        op = self.r.u8()
        if op == 0x05:
            return "syscall", Kind.SEQUENTIAL
        if op == 0x0B:
            return "ud2", Kind.HALT
        if op == 0x1F:
            mod, reg, rm = self.modrm()
            if reg != 0:
                raise _Undecodable
            return f"nop {self.rm_op(self.opsize(), mod, rm)}", Kind.SEQUENTIAL
        if op == 0x31:
            return "rdtsc", Kind.SEQUENTIAL
        if 0x40 <= op <= 0x4F:
            size = self.opsize()
            mod, reg, rm = self.modrm()
            return f"cmov{_CC_NAMES[op & 0xF]} {self.reg_op(size, reg)}, {self.rm_op(size, mod, rm)}", Kind.SEQUENTIAL
        if 0x80 <= op <= 0x8F:
            self.target = self.rel(4)
            return f"j{_CC_NAMES[op & 0xF]} {self.target:#x}", Kind.COND_BRANCH
        if 0x90 <= op <= 0x9F:
            mod, reg, rm = self.modrm()
            return f"set{_CC_NAMES[op & 0xF]} {self.rm_op(8, mod, rm)}", Kind.SEQUENTIAL
        if op == 0xA2:
            return "cpuid", Kind.SEQUENTIAL
        if op == 0xAF:
            size = self.opsize()
            mod, reg, rm = self.modrm()
            return f"imul {self.reg_op(size, reg)}, {self.rm_op(size, mod, rm)}", Kind.SEQUENTIAL
        if op in (0xB0, 0xB1):
            size = 8 if op == 0xB0 else self.opsize()
            mod, reg, rm = self.modrm()
            return f"cmpxchg {self.rm_op(size, mod, rm)}, {self.reg_op(size, reg)}", Kind.SEQUENTIAL
        if op in (0xB6, 0xB7, 0xBE, 0xBF):
            src_size = 8 if op in (0xB6, 0xBE) else 16
            name = "movzx" if op in (0xB6, 0xB7) else "movsx"
            size = self.opsize()
            mod, reg, rm = self.modrm()
            return f"{name} {self.reg_op(size, reg)}, {self.rm_op(src_size, mod, rm)}", Kind.SEQUENTIAL
        if op in (0xC0, 0xC1):
            size = 8 if op == 0xC0 else self.opsize()
            mod, reg, rm = self.modrm()
            return f"xadd {self.rm_op(size, mod, rm)}, {self.reg_op(size, reg)}", Kind.SEQUENTIAL
        if 0xC8 <= op <= 0xCF:
            size = 64 if self.rexw else 32
            return f"bswap {_reg(size, (op & 7) | ((self.rex & 1) << 3), self.rex)}", Kind.SEQUENTIAL
        raise _Undecodable


def decode_at(data: bytes, base: int, offset: int) -> Instruction:
    """Decode the instruction starting at ``base + offset``.

    Returns an ``(bad)`` marker of length 1 for anything undecodable. Pure
    function of its arguments.
    """
    if not 0 <= offset < len(data):
        raise ValueError(f"offset {offset} outside byte range [0, {len(data)})")
    dec = _Decoder(data, base, offset)
    try:
        text, kind = dec.decode()
    except _Undecodable:
        return Instruction(base + offset, 1, "(bad)", Kind.BAD)
    text = ("lock " + text) if dec.lock else text
    return Instruction(
        address=base + offset,
        length=dec.r.length,
        text=text,
        kind=kind,
        branch_target=dec.target,
        immediates=tuple(v & MASK64 for v in dec.imms),
    )


def reverse_decode(data: bytes, base: int, end: int,
                   excluded: frozenset[int] | set[int] = frozenset()) -> list[Instruction]:
    """All instructions ending exactly at ``end``, ascending by start address.

    Candidate starts range over the 15 bytes preceding ``end``; starts in
    ``excluded`` (addresses already judged invalid) are skipped.
    """
    out: list[Instruction] = []
    for k in range(MAX_INSN_LEN, 0, -1):
        off = end - base - k
        if off < 0 or off >= len(data):
            continue
        if base + off in excluded:
            continue
        insn = decode_at(data, base, off)
        if insn.length == k:
            out.append(insn)
    return out


def reverse_tree_bfs(data: bytes, base: int, root_end: int,
                     excluded: frozenset[int] | set[int] = frozenset(),
                     limit: int = 16) -> list[Instruction]:
    """Breadth-first walk of the reverse-disassembly tree rooted at ``root_end``.

    Children of a node are the start addresses of instructions ending at it.
    Enumeration is level by level, ascending start address within a level,
    truncated to ``limit`` instructions.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    out: list[Instruction] = []
    frontier = [root_end]
    while frontier and len(out) < limit:
        level: list[Instruction] = []
        for node_end in frontier:
            level.extend(reverse_decode(data, base, node_end, excluded))
        level.sort(key=lambda i: i.address)
        level = level[: limit - len(out)]
        out.extend(level)
        frontier = [i.address for i in level]
    return out
