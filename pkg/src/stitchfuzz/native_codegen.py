"""Native harness and reproducer emission, plus the fork/exec run protocol.

The amalgamated harness is one ``harness.cpp`` including a fixed runtime
header (``stitch_runtime.h``). Each block's code is inserted verbatim into a
generated driver function (block 0 becomes ``func_0``, block 1 ``func_1``,
and so on); a main loop reads a wire-format testcase from argv[1], maintains
the flat object array, resolves references, and dispatches by ordinal.

Harness <-> engine protocol (one line each, written to the file named by the
``STITCH_STATUS_FILE`` environment variable, stdout otherwise):

    ENTER <i>              before instance i executes
    SHAPE <i> <tok>...     after instance i completes; tokens f<width>|s|F
    COV <id>...            distinct SanitizerCoverage guard ids, sorted
    BAIL <i> | OK          terminal status (exit code 0)

Abnormal termination (signal or sanitizer abort) is a crash; the faulting
instance is the last ENTER line and the crash signature is derived from the
signal or the first sanitizer ERROR line plus its top frame.

Reproducers are standalone: blocks inlined into main in instance order,
object references as named locals, every FUZZ_PARAM site replaced by its
literal bytes, FUZZ_BAIL replaced by a clean successful exit, and the
typestate macros backed by a minimal store embedded in the file.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass

from .errors import EmissionError, NativeOnly, StitchError
from .spec_model import Specification
from .testcase import ParamKind, Testcase, serialize, validate
from .virtual_backend import Outcome, OutcomeKind

RUNTIME_HEADER_NAME = "stitch_runtime.h"

RUNTIME_HEADER = r"""// stitch_runtime.h -- runtime support for generated stitch harnesses.
#pragma once
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

struct StitchBail {};

[[noreturn]] inline void FUZZ_BAIL() { throw StitchBail{}; }

struct StitchParam {
    uint8_t kind;  // 0=fixed 1=str 2=file
    std::string data;
};

struct StitchCtx {
    std::vector<void*> inputs;
    std::vector<void*> outputs;
    const std::vector<StitchParam>* params = nullptr;
    size_t cursor = 0;
    std::string shape;
    std::deque<std::string> arena;  // stable backing for fixed params
};

inline StitchCtx& stitch_ctx() {
    static StitchCtx ctx;
    return ctx;
}

inline void* stitch_in(size_t j) { return stitch_ctx().inputs[j]; }
inline void stitch_out(size_t j, void* v) { stitch_ctx().outputs[j] = v; }

inline const StitchParam* stitch_next_param(uint8_t want) {
    StitchCtx& ctx = stitch_ctx();
    const StitchParam* entry = nullptr;
    if (ctx.params && ctx.cursor < ctx.params->size())
        entry = &(*ctx.params)[ctx.cursor];
    ctx.cursor++;
    return (entry && entry->kind == want) ? entry : nullptr;
}

// Fixed-size request: consume the next record entry (matching kind), coerced
// to the requested width; zero-fill past the end of the record.
inline void* stitch_param_fixed(size_t width) {
    StitchCtx& ctx = stitch_ctx();
    const StitchParam* e = stitch_next_param(0);
    char tok[32];
    snprintf(tok, sizeof tok, " f%zu", width);
    ctx.shape += tok;
    ctx.arena.emplace_back(width, '\0');
    std::string& slot = ctx.arena.back();
    if (e) {
        size_t n = e->data.size() < width ? e->data.size() : width;
        std::memcpy(&slot[0], e->data.data(), n);
    }
    return &slot[0];
}

#define FUZZ_PARAM(T) (reinterpret_cast<T*>(stitch_param_fixed(sizeof(T))))

inline std::string FUZZ_PARAM_STR() {
    stitch_ctx().shape += " s";
    const StitchParam* e = stitch_next_param(1);
    return e ? e->data : std::string();
}

inline std::string FUZZ_PARAM_FILE() {
    stitch_ctx().shape += " F";
    const StitchParam* e = stitch_next_param(2);
    return e ? e->data : std::string();
}

// --- Extrinsic typestate ---

struct StitchTVal {
    int tag;  // 0=int 1=str 2=ptr
    int64_t i;
    std::string s;
    void* p;
};

struct StitchStore {
    std::map<std::pair<const void*, std::string>, StitchTVal> attrs;
    std::map<std::string, StitchTVal> globals;
};

inline StitchStore& stitch_store() {
    static StitchStore store;
    return store;
}

inline void FUZZ_SET_ATTR_INT(const void* o, const char* k, int64_t v) {
    stitch_store().attrs[{o, k}] = StitchTVal{0, v, std::string(), nullptr};
}
inline void FUZZ_SET_ATTR_STR(const void* o, const char* k, const std::string& v) {
    stitch_store().attrs[{o, k}] = StitchTVal{1, 0, v, nullptr};
}
inline void FUZZ_SET_ATTR_PTR(const void* o, const char* k, void* v) {
    stitch_store().attrs[{o, k}] = StitchTVal{2, 0, std::string(), v};
}

inline const StitchTVal& stitch_get_attr(const void* o, const char* k, int tag) {
    StitchStore& store = stitch_store();
    auto it = store.attrs.find({o, k});
    if (it == store.attrs.end() || it->second.tag != tag) FUZZ_BAIL();
    return it->second;
}

inline int64_t FUZZ_GET_ATTR_INT(const void* o, const char* k) {
    return stitch_get_attr(o, k, 0).i;
}
inline std::string FUZZ_GET_ATTR_STR(const void* o, const char* k) {
    return stitch_get_attr(o, k, 1).s;
}
inline void* FUZZ_GET_ATTR_PTR(const void* o, const char* k) {
    return stitch_get_attr(o, k, 2).p;
}

inline void FUZZ_SET_ATTR_INT_GLOBAL(const char* k, int64_t v) {
    stitch_store().globals[k] = StitchTVal{0, v, std::string(), nullptr};
}
inline void FUZZ_SET_ATTR_STR_GLOBAL(const char* k, const std::string& v) {
    stitch_store().globals[k] = StitchTVal{1, 0, v, nullptr};
}
inline void FUZZ_SET_ATTR_PTR_GLOBAL(const char* k, void* v) {
    stitch_store().globals[k] = StitchTVal{2, 0, std::string(), v};
}

inline const StitchTVal& stitch_get_global(const char* k, int tag) {
    StitchStore& store = stitch_store();
    auto it = store.globals.find(k);
    if (it == store.globals.end() || it->second.tag != tag) FUZZ_BAIL();
    return it->second;
}

inline int64_t FUZZ_GET_ATTR_INT_GLOBAL(const char* k) {
    return stitch_get_global(k, 0).i;
}
inline std::string FUZZ_GET_ATTR_STR_GLOBAL(const char* k) {
    return stitch_get_global(k, 1).s;
}
inline void* FUZZ_GET_ATTR_PTR_GLOBAL(const char* k) {
    return stitch_get_global(k, 2).p;
}

// --- Status channel ---

inline FILE*& stitch_status_file() {
    static FILE* f = nullptr;
    return f;
}

inline void stitch_status_open() {
    const char* path = getenv("STITCH_STATUS_FILE");
    stitch_status_file() = path ? fopen(path, "w") : stdout;
    if (!stitch_status_file()) stitch_status_file() = stdout;
}

inline void stitch_status(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    vfprintf(stitch_status_file(), fmt, ap);
    va_end(ap);
    fflush(stitch_status_file());
}

// --- SanitizerCoverage transport (trace-pc-guard) ---
// The harness translation unit must NOT itself be built with
// -fsanitize-coverage (the callbacks would instrument themselves and
// recurse); instrument only the target library. The attribute below is a
// second line of defense where supported.

#if defined(__clang__) || defined(__GNUC__)
#define STITCH_NO_COV __attribute__((no_sanitize("coverage")))
#else
#define STITCH_NO_COV
#endif

inline std::vector<uint32_t>& stitch_cov_hits() {
    static std::vector<uint32_t> hits;
    return hits;
}

extern "C" STITCH_NO_COV void __sanitizer_cov_trace_pc_guard_init(
    uint32_t* start, uint32_t* stop) {
    static uint32_t counter = 0;
    for (uint32_t* g = start; g != stop; ++g)
        if (!*g) *g = ++counter;
}

extern "C" STITCH_NO_COV void __sanitizer_cov_trace_pc_guard(uint32_t* guard) {
    if (!*guard) return;
    stitch_cov_hits().push_back(*guard);
    *guard = 0;  // record each edge once per process
}

inline void stitch_cov_dump() {
    std::vector<uint32_t>& hits = stitch_cov_hits();
    if (hits.empty()) return;
    FILE* f = stitch_status_file();
    fprintf(f, "COV");
    for (uint32_t id : hits) fprintf(f, " %u", id);
    fprintf(f, "\n");
    fflush(f);
}

// --- Wire-format testcase reader (magic "STCH", version 1) ---

struct StitchInstance {
    uint32_t block;
    std::vector<uint32_t> refs;
    std::vector<StitchParam> params;
};

inline bool stitch_read_testcase(const char* path, std::vector<StitchInstance>& out) {
    FILE* f = fopen(path, "rb");
    if (!f) return false;
    std::string buf;
    char chunk[4096];
    size_t n;
    while ((n = fread(chunk, 1, sizeof chunk, f)) > 0) buf.append(chunk, n);
    fclose(f);
    size_t pos = 0;
    auto need = [&](size_t k) { return pos + k <= buf.size(); };
    auto u32 = [&](uint32_t* v) {
        if (!need(4)) return false;
        std::memcpy(v, buf.data() + pos, 4);
        pos += 4;
        return true;
    };
    if (!need(4) || std::memcmp(buf.data(), "STCH", 4) != 0) return false;
    pos = 4;
    uint32_t version = 0, count = 0;
    if (!u32(&version) || version != 1 || !u32(&count)) return false;
    for (uint32_t i = 0; i < count; ++i) {
        StitchInstance inst;
        uint32_t refs = 0, params = 0;
        if (!u32(&inst.block) || !u32(&refs)) return false;
        for (uint32_t r = 0; r < refs; ++r) {
            uint32_t k = 0;
            if (!u32(&k)) return false;
            inst.refs.push_back(k);
        }
        if (!u32(&params)) return false;
        for (uint32_t p = 0; p < params; ++p) {
            if (!need(1)) return false;
            uint8_t kind = (uint8_t)buf[pos++];
            uint32_t len = 0;
            if (!u32(&len) || !need(len)) return false;
            out.reserve(count);
            inst.params.push_back(StitchParam{kind, buf.substr(pos, len)});
            pos += len;
        }
        out.push_back(std::move(inst));
    }
    return pos == buf.size();
}
"""

_FUNC_DEF_RE = re.compile(
    r"(?m)^\s*(?!if\b|for\b|while\b|switch\b|catch\b|do\b|else\b|return\b)"
    r"(?:[A-Za-z_][\w:<>]*[\s*&]+)+[A-Za-z_]\w*\s*\([^;{}]*\)\s*(?:const\s*)?\{"
)

_PARAM_SITE_RE = re.compile(
    r"FUZZ_PARAM_STR\s*\(\s*\)|FUZZ_PARAM_FILE\s*\(\s*\)|FUZZ_PARAM\s*\(\s*([^)]+?)\s*\)"
)
_BAIL_SITE_RE = re.compile(r"FUZZ_BAIL\s*\(\s*\)")


@dataclass(frozen=True)
class HarnessSource:
    text: str
    runtime_header: str
    block_index: dict[str, int]

    def write(self, directory: str) -> str:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, RUNTIME_HEADER_NAME), "w") as fh:
            fh.write(self.runtime_header)
        path = os.path.join(directory, "harness.cpp")
        with open(path, "w") as fh:
            fh.write(self.text)
        return path


@dataclass(frozen=True)
class ReproducerSource:
    text: str

    def write(self, path: str) -> str:
        with open(path, "w") as fh:
            fh.write(self.text)
        return path


def reproducer_filename(block_name: str, crash_id: str) -> str:
    """Conventional reproducer filename: repro_<dedupkey>.cpp."""
    safe = lambda s: "".join(c if c.isalnum() or c in "._-" else "_" for c in s)
    return f"repro_{safe(block_name)}__{safe(crash_id)}.cpp"


def check_block_code(name: str, code: str) -> None:
    """Best-effort lexical rejection of function definitions in block code."""
    m = _FUNC_DEF_RE.search(code)
    if m:
        raise EmissionError(
            f"block {name!r} appears to define a function: {m.group(0).strip()!r}"
        )


def _driver_function(ordinal: int, block) -> str:
    lines = [f"// block: {block.name}", f"static void func_{ordinal}() {{"]
    input_names = set()
    for j, (name, type_name) in enumerate(block.inputs):
        input_names.add(name)
        lines.append(f"    {type_name} {name} = ({type_name})(intptr_t)stitch_in({j});")
    for name, type_name in block.outputs:
        if name not in input_names:
            lines.append(f"    {type_name} {name} {{}};")
    lines.append("    {")
    lines.append(block.code.rstrip("\n"))
    lines.append("    }")
    for o, (name, _) in enumerate(block.outputs):
        lines.append(f"    stitch_out({o}, (void*)(intptr_t)({name}));")
    lines.append("}")
    return "\n".join(lines)


def spec_includes(spec: Specification, extra: tuple[str, ...] = ()) -> tuple[str, ...]:
    """Target-library includes: the spec's preserved "includes" field plus
    any caller-supplied ones."""
    declared = tuple(spec.extra.get("includes", ()))
    return declared + tuple(i for i in extra if i not in declared)


def emit_harness(spec: Specification, extra_includes: tuple[str, ...] = ()) -> HarnessSource:
    """Amalgamated harness: func_<ordinal> per block, dispatch table, main loop.

    Emission is deterministic: the same spec yields byte-identical text.
    """
    for block in spec.blocks:
        check_block_code(block.name, block.code)

    parts = [
        "// harness.cpp -- auto-generated amalgamated stitch harness",
        f'#include "{RUNTIME_HEADER_NAME}"',
    ]
    for inc in spec_includes(spec, extra_includes):
        parts.append(f"#include {inc}")
    parts.append("")
    for ordinal, block in enumerate(spec.blocks):
        parts.append(_driver_function(ordinal, block))
        parts.append("")

    names = ", ".join(f"func_{i}" for i in range(len(spec.blocks)))
    counts = ", ".join(str(len(b.outputs)) for b in spec.blocks)
    parts.append(f"#define STITCH_BLOCK_COUNT {len(spec.blocks)}u")
    parts.append(
        "static void (*stitch_funcs[])() = {" + names + "};"
        if spec.blocks
        else "static void (**stitch_funcs)() = nullptr;"
    )
    parts.append(
        "static const unsigned stitch_out_counts[] = {" + counts + "};"
        if spec.blocks
        else "static const unsigned* stitch_out_counts = nullptr;"
    )
    parts.append(
        r"""
int main(int argc, char** argv) {
    stitch_status_open();
    if (argc < 2) {
        fprintf(stderr, "usage: %s <testcase.stc>\n", argv[0]);
        return 2;
    }
    std::vector<StitchInstance> instances;
    if (!stitch_read_testcase(argv[1], instances)) {
        fprintf(stderr, "stitch: malformed testcase file\n");
        return 2;
    }
    std::vector<void*> objects;
    for (size_t i = 0; i < instances.size(); ++i) {
        const StitchInstance& inst = instances[i];
        if (inst.block >= STITCH_BLOCK_COUNT) {
            fprintf(stderr, "stitch: block index out of range\n");
            return 2;
        }
        stitch_status("ENTER %zu\n", i);
        StitchCtx& ctx = stitch_ctx();
        ctx.inputs.clear();
        for (uint32_t k : inst.refs) {
            if (k >= objects.size()) {
                fprintf(stderr, "stitch: reference out of range\n");
                return 2;
            }
            ctx.inputs.push_back(objects[k]);
        }
        ctx.outputs.assign(stitch_out_counts[inst.block], nullptr);
        ctx.params = &inst.params;
        ctx.cursor = 0;
        ctx.shape.clear();
        ctx.arena.clear();
        try {
            stitch_funcs[inst.block]();
        } catch (const StitchBail&) {
            stitch_cov_dump();
            stitch_status("BAIL %zu\n", i);
            return 0;
        }
        for (void* o : ctx.outputs) objects.push_back(o);
        stitch_status("SHAPE %zu%s\n", i, ctx.shape.c_str());
    }
    stitch_cov_dump();
    stitch_status("OK\n");
    return 0;
}
"""
    )
    text = "\n".join(parts)
    return HarnessSource(
        text=text,
        runtime_header=RUNTIME_HEADER,
        block_index={b.name: i for i, b in enumerate(spec.blocks)},
    )


# --- Reproducers ---

REPRO_SUPPORT = r"""// minimal embedded typestate store (self-contained)
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <map>
#include <string>
#include <utility>

struct ReproTVal { int tag; int64_t i; std::string s; void* p; };
static std::map<std::pair<const void*, std::string>, ReproTVal> repro_attrs;
static std::map<std::string, ReproTVal> repro_globals;

static const ReproTVal& repro_get(const std::pair<const void*, std::string>& key, int tag) {
    auto it = repro_attrs.find(key);
    if (it == repro_attrs.end() || it->second.tag != tag) std::exit(0);
    return it->second;
}
static const ReproTVal& repro_get_g(const std::string& key, int tag) {
    auto it = repro_globals.find(key);
    if (it == repro_globals.end() || it->second.tag != tag) std::exit(0);
    return it->second;
}

static void FUZZ_SET_ATTR_INT(const void* o, const char* k, int64_t v) {
    repro_attrs[{o, k}] = ReproTVal{0, v, std::string(), nullptr};
}
static void FUZZ_SET_ATTR_STR(const void* o, const char* k, const std::string& v) {
    repro_attrs[{o, k}] = ReproTVal{1, 0, v, nullptr};
}
static void FUZZ_SET_ATTR_PTR(const void* o, const char* k, void* v) {
    repro_attrs[{o, k}] = ReproTVal{2, 0, std::string(), v};
}
static int64_t FUZZ_GET_ATTR_INT(const void* o, const char* k) { return repro_get({o, k}, 0).i; }
static std::string FUZZ_GET_ATTR_STR(const void* o, const char* k) { return repro_get({o, k}, 1).s; }
static void* FUZZ_GET_ATTR_PTR(const void* o, const char* k) { return repro_get({o, k}, 2).p; }
static void FUZZ_SET_ATTR_INT_GLOBAL(const char* k, int64_t v) {
    repro_globals[k] = ReproTVal{0, v, std::string(), nullptr};
}
static void FUZZ_SET_ATTR_STR_GLOBAL(const char* k, const std::string& v) {
    repro_globals[k] = ReproTVal{1, 0, v, nullptr};
}
static void FUZZ_SET_ATTR_PTR_GLOBAL(const char* k, void* v) {
    repro_globals[k] = ReproTVal{2, 0, std::string(), v};
}
static int64_t FUZZ_GET_ATTR_INT_GLOBAL(const char* k) { return repro_get_g(k, 0).i; }
static std::string FUZZ_GET_ATTR_STR_GLOBAL(const char* k) { return repro_get_g(k, 1).s; }
static void* FUZZ_GET_ATTR_PTR_GLOBAL(const char* k) { return repro_get_g(k, 2).p; }

template <typename T>
static T* stitch_lit(const char* bytes, size_t n) {
    static std::deque<T> slots;
    slots.emplace_back();
    T* v = &slots.back();
    std::memset((void*)v, 0, sizeof(T));
    std::memcpy((void*)v, bytes, n < sizeof(T) ? n : sizeof(T));
    return v;
}
"""


def _octal_escape(data: bytes) -> str:
    return '"' + "".join(f"\\{b:03o}" for b in data) + '"'


def _is_virtual_code(block) -> bool:
    """True when the block's code parses as a virtual block program."""
    if block.code.startswith("@file:"):
        return True
    from .blockprog import compile_program

    try:
        compile_program(block, block.code)
        return True
    except Exception:
        return False


def _substitute_fuzz_sites(code: str, params: tuple) -> tuple[str, int]:
    """Replace FUZZ_PARAM*/FUZZ_BAIL sites with literals, consuming params in
    textual order (the runtime request order for straight-line block code)."""
    cursor = 0

    def repl(m: re.Match) -> str:
        nonlocal cursor
        site = m.group(0)
        entry = params[cursor] if cursor < len(params) else None
        cursor += 1
        if site.startswith("FUZZ_PARAM_STR") or site.startswith("FUZZ_PARAM_FILE"):
            want = ParamKind.STR if "STR" in site[:15] else ParamKind.FILE
            data = entry.data if entry is not None and entry.kind == want else b""
            return f"std::string({_octal_escape(data)}, {len(data)})"
        type_name = m.group(1)
        data = entry.data if entry is not None and entry.kind == ParamKind.FIXED else b""
        return (
            f"stitch_lit<{type_name}>({_octal_escape(data)}, {len(data)})"
        )

    out = _PARAM_SITE_RE.sub(repl, code)
    out = _BAIL_SITE_RE.sub("{ return 0; }", out)
    return out, cursor


def emit_reproducer(
    spec: Specification, t: Testcase, extra_includes: tuple[str, ...] = ()
) -> ReproducerSource:
    """Standalone single-file reproducer for a (well-formed) testcase."""
    report = validate(spec, t)
    if not report.ok:
        raise StitchError(f"testcase is not well-formed: {report.violations[:3]}")
    for inst in t.instances:
        block = spec.blocks[inst.block]
        if _is_virtual_code(block):
            raise NativeOnly(
                f"block {block.name!r} holds a virtual block program; "
                "reproducers are native-only"
            )
        check_block_code(block.name, block.code)

    flat_types: list[str] = []
    parts = ["// auto-generated standalone reproducer"]
    for inc in spec_includes(spec, extra_includes):
        parts.append(f"#include {inc}")
    parts.append(REPRO_SUPPORT)
    parts.append("int main() {")
    body: list[str] = []
    for i, inst in enumerate(t.instances):
        block = spec.blocks[inst.block]
        base = len(flat_types)
        body.append(f"    // instance {i}: {block.name}")
        body.append("    {")
        input_names = set()
        for j, (name, type_name) in enumerate(block.inputs):
            input_names.add(name)
            body.append(f"    {type_name} {name} = o{inst.refs[j]};")
        for name, type_name in block.outputs:
            if name not in input_names:
                body.append(f"    {type_name} {name} {{}};")
        code, _ = _substitute_fuzz_sites(block.code.rstrip("\n"), inst.params)
        body.append(code)
        for o, (name, type_name) in enumerate(block.outputs):
            flat_types.append(type_name)
            body.append(f"    o{base + o} = {name};")
        body.append("    }")

    for k, type_name in enumerate(flat_types):
        parts.append(f"    {type_name} o{k} {{}};")
    parts.extend(body)
    parts.append("    return 0;")
    parts.append("}")
    return ReproducerSource(text="\n".join(parts) + "\n")


# --- Running compiled harnesses ---

_SAN_ERROR_RE = re.compile(r"ERROR: (.+)")
_SAN_FRAME_RE = re.compile(r"#0 0x[0-9a-f]+ in (\S+)")
_ADDR_RE = re.compile(r"0x[0-9a-fA-F]+")


def _crash_signature(returncode: int, stderr: bytes) -> str:
    text = stderr.decode("utf-8", "replace")
    m = _SAN_ERROR_RE.search(text)
    if m:
        headline = _ADDR_RE.sub("0x?", m.group(1))
        headline = re.sub(r"\(pc 0x\?.*?\)", "", headline)
        headline = re.sub(r"\s+", " ", headline).strip()
        # keep the sanitizer kind, drop volatile suffixes
        headline = headline.split(" on ")[0].split(" at ")[0]
        frame = _SAN_FRAME_RE.search(text)
        if frame:
            return f"{headline}@{frame.group(1)}"
        return headline
    if returncode < 0:
        return f"signal:{-returncode}"
    return f"exit:{returncode}"


@dataclass
class NativeRun:
    outcome: Outcome
    stderr: bytes
    returncode: int


def run_native(
    harness_path: str,
    t: Testcase,
    timeout: float = 10.0,
    keep_output: bool = False,
):
    """Fork/exec the compiled harness on a serialized testcase.

    Returns an Outcome: Completed on clean OK, Bail@i from the status line,
    Crash@i with a signature-derived crash id on abnormal termination, or
    Hang on timeout. Raises StitchError for infrastructure failures (exit
    code 2 without a crash, missing binary, unreadable status).
    """
    with tempfile.TemporaryDirectory(prefix="stitch-native-") as tmp:
        wire_path = os.path.join(tmp, "testcase.stc")
        status_path = os.path.join(tmp, "status.txt")
        with open(wire_path, "wb") as fh:
            fh.write(serialize(t))
        env = dict(os.environ)
        env["STITCH_STATUS_FILE"] = status_path
        env.setdefault("ASAN_OPTIONS", "abort_on_error=0:detect_leaks=0")
        try:
            proc = subprocess.run(
                [os.path.abspath(harness_path), wire_path],
                env=env,
                capture_output=True,
                timeout=timeout,
            )
            returncode = proc.returncode
            stderr = proc.stderr
            timed_out = False
        except subprocess.TimeoutExpired as e:
            returncode = None
            stderr = e.stderr or b""
            timed_out = True
        except FileNotFoundError as e:
            raise StitchError(f"harness not found: {harness_path}") from e

        enters: list[int] = []
        shapes: dict[int, tuple] = {}
        coverage: set[int] = set()
        final: tuple | None = None
        if os.path.exists(status_path):
            with open(status_path, "r", errors="replace") as fh:
                for line in fh:
                    fields = line.split()
                    if not fields:
                        continue
                    if fields[0] == "ENTER":
                        enters.append(int(fields[1]))
                    elif fields[0] == "SHAPE":
                        shapes[int(fields[1])] = tuple(
                            _parse_shape_token(tok) for tok in fields[2:]
                        )
                    elif fields[0] == "COV":
                        coverage.update(int(x) for x in fields[1:])
                    elif fields[0] == "BAIL":
                        final = ("bail", int(fields[1]))
                    elif fields[0] == "OK":
                        final = ("ok",)

        shape_list = tuple(shapes[i] for i in sorted(shapes))
        cov = frozenset(coverage)
        last = enters[-1] if enters else None

        if timed_out:
            outcome = Outcome(OutcomeKind.HANG, last, None, cov, shapes=shape_list)
        elif returncode == 0 and final is not None:
            if final[0] == "ok":
                outcome = Outcome(OutcomeKind.COMPLETED, None, None, cov,
                                  shapes=shape_list)
            else:
                outcome = Outcome(OutcomeKind.BAIL, final[1], None, cov,
                                  shapes=shape_list)
        elif returncode == 2 and b"stitch:" in stderr:
            raise StitchError(
                f"harness infrastructure error: {stderr.decode('utf-8', 'replace').strip()}"
            )
        else:
            outcome = Outcome(
                OutcomeKind.CRASH,
                last,
                _crash_signature(returncode if returncode is not None else 0, stderr),
                cov,
                shapes=shape_list,
            )
        if keep_output:
            return NativeRun(outcome=outcome, stderr=stderr, returncode=returncode)
        return outcome


def _parse_shape_token(tok: str):
    if tok == "s":
        return (ParamKind.STR, 0)
    if tok == "F":
        return (ParamKind.FILE, 0)
    if tok.startswith("f"):
        return (ParamKind.FIXED, int(tok[1:]))
    raise StitchError(f"bad shape token {tok!r}")


class NativeBackend:
    """Backend protocol adapter over a compiled harness binary."""

    name = "native"

    def __init__(self, harness_path: str, timeout: float = 10.0):
        self.harness_path = harness_path
        self.timeout = timeout

    def execute(self, t: Testcase) -> Outcome:
        return run_native(self.harness_path, t, timeout=self.timeout)


def _main(argv=None) -> int:
    import argparse

    from .spec_model import load_spec
    from .testcase import deserialize

    parser = argparse.ArgumentParser(
        prog="python -m stitchfuzz.native_codegen",
        description="emit native harness or reproducer sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ph = sub.add_parser("emit-harness")
    ph.add_argument("--spec", required=True)
    ph.add_argument("--out", required=True, help="output directory")
    ph.add_argument("--include", action="append", default=[],
                    help='extra #include lines, e.g. \'"minixml.h"\'')
    pr = sub.add_parser("emit-repro")
    pr.add_argument("--spec", required=True)
    pr.add_argument("--testcase", required=True)
    pr.add_argument("--out", required=True, help="output .cpp path")
    pr.add_argument("--include", action="append", default=[])
    args = parser.parse_args(argv)

    spec = load_spec(args.spec)
    if args.command == "emit-harness":
        harness = emit_harness(spec, extra_includes=tuple(args.include))
        path = harness.write(args.out)
        print(path)
        return 0
    with open(args.testcase, "rb") as fh:
        t = deserialize(fh.read(), spec)
    repro = emit_reproducer(spec, t, extra_includes=tuple(args.include))
    repro.write(args.out)
    print(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(_main())
