"""Naive reference interpreter for testcase execution semantics.

This is the oracle half of the dual-route check on execution semantics. It
re-implements the block mini-language and the big-step execution rules as
literally and simply as possible, sharing no parsing or evaluation code with
the engine's backend:

* its own tokenizer and parser producing a plain tuple AST,
* objects as fresh integers with an explicit type map and a ptr wrapper so
  stored pointers stay distinct from stored ints,
* per-object/global stores as dicts copied at every block boundary,
* sequence execution as direct recursion over the four sequence rules
  (empty, step, bail-at-head, bail-later),
* block evaluation producing outputs + updated stores or a bail signal, with
  the output arity/type premise checked explicitly.

It returns a canonical fingerprint tuple directly comparable with
``virtual_backend.outcome_fingerprint``. Favor clarity over speed here; this
module is test equipment.
"""

from __future__ import annotations

import re

I64 = 2**64
I64_MIN = -(2**63)


def _wrap(n: int) -> int:
    return (n - I64_MIN) % I64 + I64_MIN


class _Bail(Exception):
    pass


class _Crash(Exception):
    def __init__(self, crash_id):
        self.crash_id = crash_id


class _BailAt(Exception):
    def __init__(self, index):
        self.index = index


class _CrashAt(Exception):
    def __init__(self, index, crash_id):
        self.index = index
        self.crash_id = crash_id


class Ptr:
    """A stored pointer value: wraps a naive object id."""

    __slots__ = ("obj",)

    def __init__(self, obj: int):
        self.obj = obj

    def __eq__(self, other):
        return isinstance(other, Ptr) and other.obj == self.obj

    def __hash__(self):
        return hash(("ptr", self.obj))


# --- Parsing (independent of blockprog) ---

_SCAN = re.compile(
    r'\s*(?:(?P<lit>"(?:\\.|[^"\\])*")|(?P<num>-?\d+)|(?P<cid>:[\w.-]+)'
    r"|(?P<word>\w+)|(?P<punct>==|!=|<|[(),]))"
)


def _scan(line: str):
    out, pos = [], 0
    while pos < len(line):
        m = _SCAN.match(line, pos)
        if m is None or m.end() == pos:
            if line[pos:].strip() == "":
                break
            raise ValueError(f"cannot scan {line[pos:]!r}")
        pos = m.end()
        for name in ("lit", "num", "cid", "word", "punct"):
            if m.group(name) is not None:
                out.append((name, m.group(name)))
                break
    return out


def _lit_bytes(text: str) -> bytes:
    body = text[1:-1]
    out = bytearray()
    i = 0
    while i < len(body):
        if body[i] == "\\":
            nxt = body[i + 1]
            if nxt == "x":
                out.append(int(body[i + 2 : i + 4], 16))
                i += 4
            else:
                out.extend(
                    {"n": b"\n", "t": b"\t", "r": b"\r", '"': b'"',
                     "\\": b"\\", "0": b"\0"}[nxt]
                )
                i += 2
        else:
            out.extend(body[i].encode("utf-8"))
            i += 1
    return bytes(out)


def _lit_key(text: str) -> str:
    return _lit_bytes(text).decode("utf-8", "surrogateescape")


class _TokStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def pop(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def done(self):
        return self.i >= len(self.tokens)


def _parse_expr(ts: _TokStream):
    kind, text = ts.pop()
    if kind == "num":
        return ("int", _wrap(int(text)))
    if kind == "lit":
        return ("str", _lit_bytes(text))
    assert kind == "word", text
    if text in ("param", "param_int"):
        assert ts.pop()[1] == "("
        name = ts.pop()[1]
        assert ts.pop()[1] == ")"
        return (text, name)
    if text in ("attr_int", "attr_str", "attr_ptr"):
        assert ts.pop()[1] == "("
        slot = ts.pop()[1]
        assert ts.pop()[1] == ","
        key = _lit_key(ts.pop()[1])
        assert ts.pop()[1] == ")"
        return ("attr", text.split("_")[1], slot, key)
    if text in ("global_int", "global_str", "global_ptr"):
        assert ts.pop()[1] == "("
        key = _lit_key(ts.pop()[1])
        assert ts.pop()[1] == ")"
        return ("global", text.split("_")[1], key)
    if text == "ptr":
        assert ts.pop()[1] == "("
        slot = ts.pop()[1]
        assert ts.pop()[1] == ")"
        return ("ptrof", slot)
    if text == "int_mod":
        assert ts.pop()[1] == "("
        a = _parse_expr(ts)
        assert ts.pop()[1] == ","
        b = _parse_expr(ts)
        assert ts.pop()[1] == ")"
        return ("mod", a, b)
    raise ValueError(f"bad expression head {text!r}")


def _parse_cond(ts: _TokStream):
    lhs = _parse_expr(ts)
    op = ts.pop()[1]
    rhs = _parse_expr(ts)
    return (op, lhs, rhs)


def parse_program(source: str):
    """Parse .vblk text into a list of statement tuples."""
    stmts = []
    for raw in source.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        ts = _TokStream(_scan(line))
        head = ts.pop()[1]
        if head == "param":
            name = ts.pop()[1]
            mode = ts.pop()[1]
            width = int(ts.pop()[1]) if mode == "fixed" else 0
            stmts.append(("param", name, mode, width))
        elif head == "set_attr":
            slot = ts.pop()[1]
            key = _lit_key(ts.pop()[1])
            stmts.append(("set_attr", slot, key, _parse_expr(ts)))
        elif head == "set_global":
            key = _lit_key(ts.pop()[1])
            stmts.append(("set_global", key, _parse_expr(ts)))
        elif head == "bail_if":
            stmts.append(("bail_if", _parse_cond(ts)))
        elif head == "crash_if":
            cond = _parse_cond(ts)
            cid = ts.pop()[1]
            assert cid.startswith(":")
            stmts.append(("crash_if", cond, cid[1:]))
        elif head == "cover":
            stmts.append(("cover", int(ts.pop()[1])))
        elif head == "cover_if":
            cond = _parse_cond(ts)
            stmts.append(("cover_if", cond, int(ts.pop()[1])))
        elif head == "emit":
            out_idx = int(ts.pop()[1])
            mode = ts.pop()[1]
            in_idx = int(ts.pop()[1]) if mode == "passthrough" else None
            stmts.append(("emit", out_idx, mode, in_idx))
        elif head == "bail":
            stmts.append(("bail",))
        else:
            raise ValueError(f"bad instruction {head!r}")
        assert ts.done(), line
    return stmts


# --- Evaluation ---


class _BlockEval:
    """[[Code_b]]: evaluates one block over copies of the typestate stores."""

    def __init__(self, program, block, inputs, params, m_o, m_g, types):
        self.program = program
        self.block = block
        self.inputs = inputs
        self.params = list(params)
        self.m_o = {o: dict(attrs) for o, attrs in m_o.items()}
        self.m_g = dict(m_g)
        self.types = types
        self.outputs = [None] * len(block.outputs)
        self.bindings = {}
        self.cursor = 0
        self.coverage = []

    def slot_obj(self, slot: str) -> int:
        if slot.startswith("out"):
            return self.outputs[int(slot[3:])]
        return self.inputs[int(slot[2:])]

    def read_typed(self, mapping, key, want):
        if key not in mapping:
            raise _Bail()
        value = mapping[key]
        actual = "int" if isinstance(value, int) else (
            "str" if isinstance(value, bytes) else "ptr"
        )
        if actual != want:
            raise _Bail()
        return value

    def eval_expr(self, expr):
        tag = expr[0]
        if tag in ("int", "str"):
            return expr[1]
        if tag == "param":
            return self.bindings[expr[1]]
        if tag == "param_int":
            return _wrap(int.from_bytes(self.bindings[expr[1]], "little"))
        if tag == "attr":
            obj = self.slot_obj(expr[2])
            return self.read_typed(self.m_o.get(obj, {}), expr[3], expr[1])
        if tag == "global":
            return self.read_typed(self.m_g, expr[2], expr[1])
        if tag == "ptrof":
            return Ptr(self.slot_obj(expr[1]))
        if tag == "mod":
            a = self.eval_expr(expr[1])
            b = self.eval_expr(expr[2])
            if b == 0:
                raise _Bail()
            return a % b
        raise AssertionError(tag)

    def eval_cond(self, cond) -> bool:
        op, l, r = cond
        lv, rv = self.eval_expr(l), self.eval_expr(r)
        if op == "==":
            return lv == rv
        if op == "!=":
            return lv != rv
        return lv < rv

    def take_param(self, mode: str, width: int) -> bytes:
        want = {"fixed": 0, "str": 1, "file": 2}[mode]
        entry = self.params[self.cursor] if self.cursor < len(self.params) else None
        self.cursor += 1
        if entry is not None and int(entry.kind) == want:
            data = entry.data
            if mode == "fixed" and len(data) != width:
                data = (data + b"\x00" * width)[:width]
            return data
        return b"\x00" * width if mode == "fixed" else b""

    def run(self, fresh_id):
        for stmt in self.program:
            op = stmt[0]
            if op == "param":
                self.bindings[stmt[1]] = self.take_param(stmt[2], stmt[3])
            elif op == "set_attr":
                obj = self.slot_obj(stmt[1])
                self.m_o.setdefault(obj, {})[stmt[2]] = self.eval_expr(stmt[3])
            elif op == "set_global":
                self.m_g[stmt[1]] = self.eval_expr(stmt[2])
            elif op == "bail_if":
                if self.eval_cond(stmt[1]):
                    raise _Bail()
            elif op == "crash_if":
                if self.eval_cond(stmt[1]):
                    raise _Crash(stmt[2])
            elif op == "cover":
                self.coverage.append(stmt[1])
            elif op == "cover_if":
                if self.eval_cond(stmt[1]):
                    self.coverage.append(stmt[2])
            elif op == "emit":
                _, out_idx, mode, in_idx = stmt
                if mode == "new":
                    obj = fresh_id()
                    self.types[obj] = self.block.output_types[out_idx]
                else:
                    obj = self.inputs[in_idx]
                self.outputs[out_idx] = obj
            elif op == "bail":
                raise _Bail()
            else:
                raise AssertionError(op)
        return self.outputs, self.m_o, self.m_g


def run_reference(spec, t, base_dir: str | None = None):
    """Execute a testcase per the big-step rules; returns a fingerprint tuple.

    The fingerprint matches ``virtual_backend.outcome_fingerprint``:
    (kind, index, crash_id, sorted coverage[, state structure]).
    """
    from .virtual_backend import load_block_code  # code-field resolution only

    programs = [parse_program(load_block_code(b.code, base_dir)) for b in spec.blocks]
    types: dict[int, str] = {}
    coverage: list[int] = []
    counter = [0]

    def fresh_id() -> int:
        counter[0] += 1
        return counter[0]

    def step(objects, m_o, m_g, inst):
        """Single-step judgment: new state, or bail/crash escape."""
        block = spec.blocks[inst.block]
        inputs = [objects[k] for k in inst.refs]  # resolve(r, O)
        ev = _BlockEval(programs[inst.block], block, inputs, inst.params,
                        m_o, m_g, types)
        try:
            outputs, m_o2, m_g2 = ev.run(fresh_id)
        finally:
            coverage.extend(ev.coverage)
        # Exec-Success premises: arity and per-slot type agreement.
        assert len(outputs) == len(block.outputs)
        for obj, want in zip(outputs, block.output_types):
            assert obj is not None and types[obj] == want
        return objects + outputs, m_o2, m_g2

    def run_seq(objects, m_o, m_g, rest, pos):
        if not rest:  # Seq-Empty
            return objects, m_o, m_g
        try:
            objects2, m_o2, m_g2 = step(objects, m_o, m_g, rest[0])
        except _Bail:
            raise _BailAt(pos) from None  # Seq-Bail
        except _Crash as c:
            raise _CrashAt(pos, c.crash_id) from None
        # Seq-Step / Seq-Bail-Later: positions are absolute, so escapes
        # propagate unchanged.
        return run_seq(objects2, m_o2, m_g2, rest[1:], pos + 1)

    try:
        objects, m_o, m_g = run_seq([], {}, {}, list(t.instances), 0)
    except _BailAt as b:
        return ("bail", b.index, None, tuple(sorted(set(coverage))))
    except _CrashAt as c:
        return ("crash", c.index, c.crash_id, tuple(sorted(set(coverage))))

    first_index: dict[int, int] = {}
    for i, obj in enumerate(objects):
        first_index.setdefault(obj, i)

    def value_repr(v):
        if isinstance(v, Ptr):
            return ("ptr", first_index[v.obj])
        if isinstance(v, bytes):
            return ("str", v)
        return ("int", v)

    obj_list = [(types[o], first_index[o]) for o in objects]
    per_object = {}
    for obj, attrs in m_o.items():
        if obj not in first_index:
            continue
        per_object[first_index[obj]] = {k: value_repr(v) for k, v in attrs.items()}
    global_map = {k: value_repr(v) for k, v in m_g.items()}
    return ("completed", None, None, tuple(sorted(set(coverage))),
            (obj_list, per_object, global_map))
