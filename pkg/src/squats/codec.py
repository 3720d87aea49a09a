"""Serial OR-register encoder and its decoders.

The encoder quantizes each sample, picks the matching codeword of that
sample's bin and ORs it into a single ``b``-bit register.  Two decoders read
the register back:

* :func:`decode_ml` -- maximum likelihood over sets of at most ``k``
  codewords, one per bin.  In the noiseless case any codeword with a one
  where the register has a zero has likelihood zero, so the search runs over
  the survivors of :func:`eliminate` only, which does not change the argmax.
* :func:`decode_coma` -- column matching: every survivor declares its sample.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import bits
from .codebook import generate
from .errors import BudgetExceeded

DEFAULT_BUDGET = 2_000_000


class Register:
    """A ``b``-bit word, initially all zero."""

    __slots__ = ("b", "words")

    def __init__(self, b, words=None):
        self.b = int(b)
        if words is None:
            words = np.zeros(bits.n_words(b), dtype=np.uint64)
        self.words = np.array(words, dtype=np.uint64)
        if self.words.shape != (bits.n_words(b),):
            raise ValueError(f"register of {b} bits needs {bits.n_words(b)} words")

    @classmethod
    def from_bits(cls, bitvec):
        bitvec = np.asarray(bitvec)
        return cls(bitvec.size, bits.pack(bitvec))

    @classmethod
    def from_bytes(cls, data, b):
        return cls(b, bits.from_bytes(np.frombuffer(bytes(data), dtype=np.uint8), b))

    def to_bits(self):
        return bits.unpack(self.words, self.b)

    def to_bytes(self):
        return bits.to_bytes(self.words, self.b).tobytes()

    def __ior__(self, word):
        self.words |= word.words if isinstance(word, Register) else word
        return self

    def __or__(self, other):
        return Register(self.b, self.words | other.words)

    def __eq__(self, other):
        return isinstance(other, Register) and self.b == other.b and np.array_equal(
            self.words, other.words)

    def __hash__(self):
        return hash((self.b, self.words.tobytes()))

    def popcount(self):
        return int(bits.popcount(self.words))

    def any(self):
        return bool(self.words.any())

    def copy(self):
        return Register(self.b, self.words.copy())

    def __repr__(self):
        return f"Register(b={self.b}, ones={self.popcount()})"


@dataclass(frozen=True)
class NoiseModel:
    """Independent bit flips on the register: 0->1 with prob ``q``, 1->0 with prob ``u``."""

    q: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if not 0 <= self.q < 0.5:
            raise ValueError(f"need 0 <= q < 1/2, got {self.q}")
        if not 0 <= self.u < 1:
            raise ValueError(f"need 0 <= u < 1, got {self.u}")

    @property
    def noiseless(self):
        return self.q == 0 and self.u == 0

    def to_dict(self):
        return {"q": self.q, "u": self.u}


@dataclass
class DecodeResult:
    signal: np.ndarray
    support: tuple
    log_likelihood: float = None
    exact_match: bool = False
    candidates_examined: int = 0
    fallback: bool = False
    flags: dict = field(default_factory=dict)

    @property
    def bins(self):
        return {i for i, _ in self.support}


class SerialEncoder:
    """One-pass encoder: feed samples in time order with :meth:`push`."""

    def __init__(self, codebook, quantizer):
        if quantizer.levels != codebook.l:
            raise ValueError(f"quantizer has {quantizer.levels} levels, codebook {codebook.l}")
        self.codebook = codebook
        self.quantizer = quantizer
        self.register = Register(codebook.b)
        self.position = 0

    def push(self, sample, position=None):
        i = self.position if position is None else position
        if not 0 <= i < self.codebook.T:
            raise IndexError(f"sample position {i} outside 0..{self.codebook.T - 1}")
        j = int(self.quantizer.index(sample))
        if j:
            self.register |= self.codebook.words[i, j - 1]
        self.position = i + 1
        return j


def encode(signal, codebook, quantizer, order=None):
    """OR together the codewords selected by each quantized sample.

    ``order`` optionally permutes the processing order (the output does not
    depend on it).
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1 or signal.size != codebook.T:
        raise ValueError(f"signal length {signal.size} does not match T={codebook.T}")
    enc = SerialEncoder(codebook, quantizer)
    for i in (range(codebook.T) if order is None else order):
        enc.push(signal[i], position=int(i))
    return enc.register


def selected_pairs(signal, quantizer):
    """The ``(bin, level)`` pairs the encoder selects for nonzero levels."""
    idx = quantizer.index(np.asarray(signal, dtype=float))
    nz = np.flatnonzero(idx)
    return tuple((int(i), int(idx[i])) for i in nz)


def eliminate(reg, codebook):
    """All ``(bin, level)`` whose codeword is covered by ``reg``."""
    cov = bits.covered(codebook.words, reg.words)
    bins_, lev = np.nonzero(cov)
    return list(zip(bins_.tolist(), (lev + 1).tolist()))


def _result_from_support(support, codebook, quantizer, **kw):
    signal = np.zeros(codebook.T)
    for i, j in support:
        signal[i] = quantizer.values[j]
    return DecodeResult(signal=signal, support=tuple(sorted(support)), **kw)


def decode_coma(reg, codebook, quantizer, rng=None):
    """Column matching: each bin with a surviving codeword takes a random survivor's level."""
    rng = np.random.default_rng(rng)
    cov = bits.covered(codebook.words, reg.words)
    support = []
    for i in np.flatnonzero(cov.any(axis=1)):
        levels = np.flatnonzero(cov[i]) + 1
        j = levels[0] if levels.size == 1 else rng.choice(levels)
        support.append((int(i), int(j)))
    return _result_from_support(support, codebook, quantizer, exact_match=False,
                                candidates_examined=codebook.T * codebook.l)


def _lex_key(support):
    return (len(support), tuple(sorted(support)))


def _exact_cover_search(y, cand, cand_bins, k, budget):
    """All minimum-size sets (<= k, distinct bins) of candidates whose OR equals ``y``.

    Branches on the lowest one-bit of ``y`` not yet covered, so every branch
    makes progress and subsets that leave a bit uncovered are never listed.
    Returns ``(solutions, nodes)``; ``solutions`` is a set of frozensets of
    candidate indices.
    """
    b_words = y.size
    cbits = bits.unpack(cand, b_words * 64).astype(bool) if len(cand) else np.zeros(
        (0, b_words * 64), dtype=bool)
    nodes = 0

    def dfs(z, chosen, used_bins, depth_left, found):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise _Budget()
        missing = y & ~z
        if not missing.any():
            found.add(frozenset(chosen))
            return
        if depth_left == 0:
            return
        miss_bits = bits.unpack(missing, b_words * 64).astype(bool)
        first = int(np.argmax(miss_bits))
        # a set of depth_left words must cover every missing bit
        if depth_left * max_weight < miss_bits.sum():
            return
        for c in np.flatnonzero(cbits[:, first]):
            if cand_bins[c] in used_bins:
                continue
            dfs(z | cand[c], chosen + [c], used_bins | {cand_bins[c]}, depth_left - 1, found)

    max_weight = int(cbits.sum(axis=1).max()) if len(cand) else 0
    zero = np.zeros_like(y)
    if not y.any():
        return {frozenset()}, 1
    for size in range(1, k + 1):
        found = set()
        dfs(zero, [], frozenset(), size, found)
        found = {s for s in found if len(s) == size}
        if found:
            return found, nodes
    return set(), nodes


class _Budget(Exception):
    pass


def _noise_weights(noise):
    q = max(noise.q, 1e-12)
    u = max(noise.u, 1e-12)
    gain = math.log1p(-u) - math.log(q)   # per covered one of y
    cost = math.log1p(-q) - math.log(u)   # per covered zero of y
    return q, u, gain, cost


def log_likelihood(y, z, b, noise):
    """log P(y | union word z) under the bit-flip model (zero probabilities floored at 1e-12)."""
    q, u, gain, cost = _noise_weights(noise)
    ny1 = int(bits.popcount(y))
    base = ny1 * math.log(q) + (b - ny1) * math.log1p(-q)
    return base + gain * int(bits.popcount(z & y)) - cost * int(bits.popcount(z & ~y))


def noisy_candidates(reg, codebook, noise, exact=False, alpha=1e-6):
    """Codewords plausible under 1->0 flips: ones on zero-bits of ``reg`` within the
    ``1 - alpha`` binomial quantile.  ``exact`` keeps every codeword."""
    flat = codebook.words.reshape(-1, codebook.words.shape[-1])
    if exact:
        return np.arange(flat.shape[0])
    ones = bits.popcount(flat)
    miss = bits.popcount(flat & ~reg.words)
    limit = stats.binom.ppf(1 - alpha, ones, noise.u) if noise.u > 0 else np.zeros_like(ones)
    return np.flatnonzero(miss <= limit)


def _noisy_search(y, b, cand, cand_bins, k, noise, budget):
    """Branch and bound for the max-likelihood set of <= k candidates with distinct bins.

    Adding words to a partial union ``z`` changes the log-likelihood by
    ``gain |new ∧ y| - cost |new ∧ ¬y|``.  Siblings are expanded in
    decreasing order of that marginal and each later sibling only combines
    with words after it, which bounds what ``r`` further words can add.  A
    word's gain at a node also bounds its marginal anywhere below, so
    children only look at words that could still close the gap to the best
    set found so far.
    """
    _, _, gain, cost = _noise_weights(noise)
    ny = ~y
    base = log_likelihood(y, np.zeros_like(y), b, noise)
    best = {"ll": base, "set": ()}
    nodes = 0
    tol = 1e-9

    def better(ll, chosen):
        if ll > best["ll"] + tol:
            return True
        if ll < best["ll"] - tol:
            return False
        return _lex_key([(cand_bins[c], c) for c in chosen]) < _lex_key(
            [(cand_bins[c], c) for c in best["set"]])

    def dfs(z, ll, chosen, idx, ub):
        # idx: candidate ids still allowed here; ub: upper bounds on their marginals
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise _Budget()
        if better(ll, chosen):
            best["ll"], best["set"] = ll, tuple(chosen)
        r = k - len(chosen)
        if r == 0 or idx.size == 0:
            return
        if ub is not None:
            need = best["ll"] - ll - tol
            idx = idx[ub + (r - 1) * float(ub.max()) >= need]
        if chosen and idx.size:
            idx = idx[~np.isin(cand_bins[idx], cand_bins[chosen])]
        if idx.size == 0:
            return
        words = cand[idx]
        free = ~z
        a = gain * bits.popcount(words & y & free)
        marg = a - cost * bits.popcount(words & ny & free)
        if r == 1:
            for o in np.flatnonzero(ll + marg >= best["ll"] - tol):
                nodes += 1
                if better(ll + float(marg[o]), chosen + [idx[o]]):
                    best["ll"], best["set"] = ll + float(marg[o]), tuple(chosen + [idx[o]])
            return
        order = np.argsort(-marg, kind="stable")
        ids = idx[order]
        m_sorted = marg[order]
        a_sorted = np.maximum(a[order], 0.0)
        if cost >= 0:
            # later siblings only: suffix max of their gain, and since any
            # later word has marg <= marg[o], a pair adds at most a[o] + marg[o]
            later = np.append(np.maximum.accumulate(a_sorted[::-1])[::-1][1:], 0.0)
            loose = m_sorted + (r - 1) * later
            tight = m_sorted + np.minimum(a_sorted, later) + (r - 2) * later
        else:
            # zero-bits of y are rewarded too; bound each word on its own
            ub = a_sorted - cost * bits.popcount(words & ny & free)
            rest = float(np.sort(ub)[::-1][: r - 1].sum())
            loose = tight = m_sorted + rest
        for pos in range(len(ids)):
            if ll + float(loose[pos]) < best["ll"] - tol:
                break
            if ll + float(tight[pos]) < best["ll"] - tol:
                continue
            c = ids[pos]
            child_ub = None
            if cost >= 0:
                # c can cancel at most its own y-zero penalty from a later word
                child_ub = np.minimum(a_sorted[pos + 1:],
                                      m_sorted[pos + 1:] + (a_sorted[pos] - m_sorted[pos]))
            dfs(z | cand[c], ll + float(m_sorted[pos]), chosen + [c], ids[pos + 1:], child_ub)

    try:
        dfs(np.zeros_like(y), base, [], np.arange(len(cand)), None)
        complete = True
    except _Budget:
        complete = False
    return best, nodes, complete


def decode_ml(reg, codebook, quantizer, k=None, noise=None, exact=False,
              fallback_noise=NoiseModel(0.01, 0.01), budget=DEFAULT_BUDGET):
    """Maximum-likelihood decoding of the register.

    Noiseless (``noise`` is None or has ``q = u = 0``): returns the smallest
    set of at most ``k`` survivor codewords, one per bin, whose OR equals the
    register; ties go to the lexicographically smallest ``(bin, level)``
    sequence.  If no such set exists the register is rescored with
    ``fallback_noise`` and the result carries ``fallback=True``.

    Noisy: maximises the bit-flip log-likelihood over candidates pruned by
    :func:`noisy_candidates` (``exact=True`` disables pruning).

    Raises :class:`BudgetExceeded` (with the best partial result) when the
    search visits more than ``budget`` nodes.
    """
    k = codebook.k if k is None else int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    if noise is None or noise.noiseless:
        survivors = eliminate(reg, codebook)
        if survivors:
            cand = np.stack([codebook.words[i, j - 1] for i, j in survivors])
        else:
            cand = np.zeros((0, reg.words.size), dtype=np.uint64)
        cand_bins = np.array([i for i, _ in survivors], dtype=np.int64)
        try:
            sols, nodes = _exact_cover_search(reg.words, cand, cand_bins, k, budget)
        except _Budget:
            partial = _result_from_support((), codebook, quantizer, candidates_examined=budget)
            raise BudgetExceeded(f"exact search exceeded {budget} nodes", partial) from None
        if sols:
            supports = [tuple(sorted(survivors[c] for c in s)) for s in sols]
            pick = min(supports, key=_lex_key)
            return _result_from_support(pick, codebook, quantizer, log_likelihood=0.0,
                                        exact_match=True, candidates_examined=nodes)
        res = decode_ml(reg, codebook, quantizer, k=k, noise=fallback_noise, exact=exact,
                        budget=budget)
        res.fallback = True
        res.exact_match = False
        res.candidates_examined += nodes
        return res

    flat_idx = noisy_candidates(reg, codebook, noise, exact=exact)
    flat = codebook.words.reshape(-1, codebook.words.shape[-1])
    cand = flat[flat_idx]
    cand_bins = flat_idx // codebook.l
    best, nodes, complete = _noisy_search(reg.words, codebook.b, cand, cand_bins, k, noise,
                                          budget)
    support = [(int(flat_idx[c] // codebook.l), int(flat_idx[c] % codebook.l) + 1)
               for c in best["set"]]
    res = _result_from_support(support, codebook, quantizer, log_likelihood=best["ll"],
                               candidates_examined=nodes)
    res.flags["candidates"] = int(len(flat_idx))
    if not complete:
        raise BudgetExceeded(f"noisy search exceeded {budget} nodes", res)
    return res


def fragment_codebooks(T, groups, l, k, b_total, seed=None, k_per_group=None):
    """Independent codebooks for ``groups`` contiguous fragments of a length-``T`` signal.

    Each fragment has ``ceil(T / groups)`` samples (the last one zero-padded)
    and ``b_total // groups`` bits.
    """
    tg = -(-T // groups)
    kg = k_per_group if k_per_group is not None else max(1, -(-k // groups))
    bg = b_total // groups
    if bg < 1:
        raise ValueError(f"{b_total} bits cannot be split into {groups} groups")
    seeds = np.random.SeedSequence(seed).spawn(groups)
    return [generate(tg, l, kg, bg, seed=int(s.generate_state(1, dtype=np.uint64)[0]))
            for s in seeds]


def fragment_pipeline(signal, groups, quantizer, codebooks=None, b_total=None, k=None,
                      decoder="coma", seed=None, rng=None, k_per_group=None):
    """Split ``signal`` into ``groups`` fragments, code each one separately, concatenate.

    Pass prebuilt ``codebooks`` (see :func:`fragment_codebooks`) or
    ``b_total`` and ``k`` to build them from ``seed``.  The result's
    ``flags["bits"]`` is the total register length used.
    """
    signal = np.asarray(signal, dtype=float)
    T = signal.size
    if codebooks is None:
        if b_total is None or k is None:
            raise ValueError("need codebooks or both b_total and k")
        codebooks = fragment_codebooks(T, groups, quantizer.levels, k, b_total, seed,
                                       k_per_group=k_per_group)
    if len(codebooks) != groups:
        raise ValueError(f"got {len(codebooks)} codebooks for {groups} groups")
    tg = codebooks[0].T
    padded = np.zeros(tg * groups)
    padded[:T] = signal
    rng = np.random.default_rng(rng)
    out = np.zeros(tg * groups)
    support, nodes, exact = [], 0, True
    for g, cb in enumerate(codebooks):
        part = padded[g * tg:(g + 1) * tg]
        reg = encode(part, cb, quantizer)
        if decoder == "coma":
            res = decode_coma(reg, cb, quantizer, rng)
        elif decoder == "ml":
            res = decode_ml(reg, cb, quantizer)
        else:
            raise ValueError(f"unknown decoder {decoder!r}")
        out[g * tg:(g + 1) * tg] = res.signal
        support.extend((g * tg + i, j) for i, j in res.support if g * tg + i < T)
        nodes += res.candidates_examined
        exact &= res.exact_match
    return DecodeResult(signal=out[:T], support=tuple(sorted(support)), exact_match=exact,
                        candidates_examined=nodes,
                        flags={"bits": sum(cb.b for cb in codebooks)})
