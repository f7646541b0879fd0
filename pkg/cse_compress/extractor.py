"""两项公共子表达式（CSE）检测：随机列配对 + 交换尝试的局部搜索。

每轮迭代先把所有列随机两两配对，计算每个列对上重复出现的加法项
t[r,i]·v[i] + t[r,j]·v[j] 的收益 Σ(z-1)，然后做若干次交换尝试：从两个不同的列对中
各取一列互换，只要总收益不下降就保留。迭代结束时把选中的公共项从矩阵中消去，
下一轮在更新后的矩阵上进行。

随机数取用顺序（同一种子逐位可复现）：
    每轮迭代: rng.permutation(N) 决定配对，排列中相邻两项组成一对，N 为奇数时最后一列轮空；
    每次尝试: 一次 rng.integers 调用取出 [pair_a, pair_b', side_a, side_b]，
              pair_b' ≥ pair_a 时加一，保证两个列对不同。
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CorruptedSetError, DegenerateInputError
from .matrix import DenseMatrix
from .utils.logger import get_logger

logger = get_logger(__name__)

# 把 (t_ri, t_rj) 打包成一个 int64 键；权重在有符号 32 位内，键的顺序即字典序
_KEY_STRIDE = np.int64(2 ** 32)

AttemptCallback = Callable[[int, int, int, bool], None]


@dataclass(frozen=True)
class Pairing:
    """一次迭代中的列配对"""

    pairs: Tuple[Tuple[int, int], ...]
    unpaired: Tuple[int, ...] = ()

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        unpaired = tuple(int(c) for c in self.unpaired)
        seen = [c for pair in pairs for c in pair] + list(unpaired)
        if len(seen) != len(set(seen)):
            raise DegenerateInputError(f"配对中存在重复的列: {pairs} / {unpaired}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "unpaired", unpaired)

    @property
    def columns(self) -> set[int]:
        return {c for pair in self.pairs for c in pair} | set(self.unpaired)

    def covers(self, n_cols: int) -> bool:
        """是否恰好覆盖 0..n_cols-1 的所有列"""
        return self.columns == set(range(n_cols))

    def replaced(self, index_a: int, pair_a: Tuple[int, int],
                 index_b: int, pair_b: Tuple[int, int]) -> "Pairing":
        pairs = list(self.pairs)
        pairs[index_a] = pair_a
        pairs[index_b] = pair_b
        return Pairing(tuple(pairs), self.unpaired)


@dataclass(frozen=True)
class CseTerm:
    """一个两项公共子表达式：列对、权重对及其出现的行"""

    col_i: int
    col_j: int
    w_i: int
    w_j: int
    occ_rows: Tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(r) for r in self.occ_rows)
        object.__setattr__(self, "occ_rows", rows)
        for name in ("col_i", "col_j", "w_i", "w_j"):
            object.__setattr__(self, name, int(getattr(self, name)))

        if self.col_i == self.col_j:
            raise CorruptedSetError(f"CSE 的两列必须不同: {self.col_i}")
        if self.w_i == 0 or self.w_j == 0:
            raise CorruptedSetError(f"CSE 权重不能为零: ({self.w_i}, {self.w_j})")
        if len(rows) < 2:
            raise CorruptedSetError(f"CSE 至少出现两次，当前行: {rows}")
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise CorruptedSetError(f"CSE 出现行必须严格递增: {rows}")

    @property
    def z(self) -> int:
        return len(self.occ_rows)

    @property
    def gain(self) -> int:
        return self.z - 1

    def cells(self) -> Iterator[Tuple[int, int]]:
        for r in self.occ_rows:
            yield r, self.col_i
            yield r, self.col_j

    def sort_key(self) -> Tuple[int, int, int, int]:
        return self.col_i, self.col_j, self.w_i, self.w_j


@dataclass(frozen=True)
class CseSet:
    """算法返回的 CSE 集合"""

    terms: Tuple[CseTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[CseTerm]:
        return iter(self.terms)

    @property
    def n_cse(self) -> int:
        return len(self.terms)

    @property
    def total_gain(self) -> int:
        """gain = Σ (z - 1)"""
        return sum(term.gain for term in self.terms)

    @property
    def occurrences(self) -> int:
        """Σ z，即 gain + |CSE|"""
        return sum(term.z for term in self.terms)

    def cells(self) -> Iterator[Tuple[int, int]]:
        for term in self.terms:
            yield from term.cells()

    def check_disjoint(self) -> None:
        """任意单元格至多被一个 CSE 占用"""
        seen: set[Tuple[int, int]] = set()
        for cell in self.cells():
            if cell in seen:
                raise CorruptedSetError(f"单元格 {cell} 被多个 CSE 占用")
            seen.add(cell)

    def canonical(self) -> "CseSet":
        """按 (col_i, col_j, w_i, w_j) 排序"""
        return CseSet(tuple(sorted(self.terms, key=CseTerm.sort_key)))


@dataclass(frozen=True)
class ExtractConfig:
    """搜索参数：迭代次数 It、每轮尝试次数 At、随机种子、零收益提前停止"""

    iterations: int = 100
    attempts: int = 500
    seed: int = 0
    early_stop: bool = False

    def validate(self) -> None:
        if self.iterations < 1:
            raise DegenerateInputError(f"迭代次数 It 必须 ≥ 1，当前为 {self.iterations}")
        if self.attempts < 0:
            raise DegenerateInputError(f"尝试次数 At 不能为负数，当前为 {self.attempts}")
        if not 0 <= self.seed < 2 ** 64:
            raise DegenerateInputError(f"种子必须是 64 位无符号整数，当前为 {self.seed}")


@dataclass(frozen=True)
class SwapMove:
    """交换尝试：pair_a 的第 side_a 列与 pair_b 的第 side_b 列互换"""

    pair_a: int
    side_a: int
    pair_b: int
    side_b: int


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    initial_gain: int
    final_gain: int
    accepted: int
    n_terms: int


@dataclass(frozen=True)
class ExtractResult:
    commons: CseSet
    remainder: DenseMatrix
    history: Tuple[IterationStats, ...] = field(default_factory=tuple)

    @property
    def total_gain(self) -> int:
        return self.commons.total_gain

    @property
    def iterations_run(self) -> int:
        return len(self.history)


class _PairEvaluator:
    """在固定矩阵上计算列对收益；列按行连续存放以加速切片"""

    def __init__(self, entries: np.ndarray):
        self.columns = np.ascontiguousarray(entries.T)
        self.nonzero = self.columns != 0

    def _keys(self, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        both = self.nonzero[i] & self.nonzero[j]
        rows = np.flatnonzero(both)
        keys = self.columns[i][rows] * _KEY_STRIDE + self.columns[j][rows]
        return rows, keys

    def gain(self, i: int, j: int) -> int:
        both = self.nonzero[i] & self.nonzero[j]
        if np.count_nonzero(both) < 2:
            return 0
        keys = self.columns[i][both] * _KEY_STRIDE + self.columns[j][both]
        keys.sort()
        # 排序后相邻相等的个数正好是 Σ(z-1)
        return int(np.count_nonzero(keys[1:] == keys[:-1]))

    def terms(self, i: int, j: int) -> List[CseTerm]:
        rows, keys = self._keys(i, j)
        if rows.size < 2:
            return []
        order = np.argsort(keys, kind="stable")
        boundaries = np.flatnonzero(np.diff(keys[order])) + 1
        terms = []
        for group in np.split(order, boundaries):
            if group.size < 2:
                continue
            occ = rows[group]
            first = occ[0]
            terms.append(CseTerm(
                col_i=i,
                col_j=j,
                w_i=self.columns[i][first],
                w_j=self.columns[j][first],
                occ_rows=tuple(occ.tolist()),
            ))
        return terms


def _check_column(m: DenseMatrix, col: int) -> None:
    if not 0 <= col < m.cols:
        raise DegenerateInputError(f"列号 {col} 超出范围 [0, {m.cols})")


def _exchange(pair_a: Tuple[int, int], pair_b: Tuple[int, int],
              move: SwapMove) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    a = list(pair_a)
    b = list(pair_b)
    a[move.side_a], b[move.side_b] = b[move.side_b], a[move.side_a]
    return (min(a), max(a)), (min(b), max(b))


def _draw_move(rng: np.random.Generator, n_pairs: int) -> SwapMove:
    pair_a, pair_b, side_a, side_b = (
        int(x) for x in rng.integers(0, [n_pairs, n_pairs - 1, 2, 2])
    )
    if pair_b >= pair_a:
        pair_b += 1
    return SwapMove(pair_a=pair_a, side_a=side_a, pair_b=pair_b, side_b=side_b)


def pair_columns_random(n_cols: int, rng: np.random.Generator) -> Pairing:
    """随机打乱列并两两配对；N 为奇数时恰好一列轮空"""
    if n_cols < 2:
        raise DegenerateInputError(f"至少需要两列才能配对，当前为 {n_cols}")
    perm = rng.permutation(n_cols)
    half = n_cols // 2
    pairs = tuple(
        (int(min(perm[2 * k], perm[2 * k + 1])), int(max(perm[2 * k], perm[2 * k + 1])))
        for k in range(half)
    )
    unpaired = (int(perm[-1]),) if n_cols % 2 else ()
    return Pairing(pairs, unpaired)


def pair_gain(m: DenseMatrix, i: int, j: int) -> Tuple[int, List[CseTerm]]:
    """列对 (i, j) 的收益及所有 z ≥ 2 的加法项；只考虑两列均非零的行"""
    if i == j:
        raise DegenerateInputError(f"列对的两列必须不同: {i}")
    _check_column(m, i)
    _check_column(m, j)
    terms = _PairEvaluator(m.entries).terms(i, j)
    return sum(term.gain for term in terms), terms


def pairing_gain(m: DenseMatrix, p: Pairing) -> Tuple[int, CseSet]:
    """整个配对的收益，以及各列对返回的全部加法项"""
    if not p.covers(m.cols):
        raise DegenerateInputError(f"配对没有恰好覆盖矩阵的 {m.cols} 列")
    evaluator = _PairEvaluator(m.entries)
    terms: List[CseTerm] = []
    for i, j in p.pairs:
        terms.extend(evaluator.terms(i, j))
    commons = CseSet(tuple(terms))
    return commons.total_gain, commons


def apply_swap(m: DenseMatrix, p: Pairing, current_gain: int,
               move: SwapMove) -> Tuple[Pairing, int, bool]:
    """执行一次确定的交换尝试，只重新评估受影响的两个列对。

    新收益不低于当前收益（含持平）时保留交换，否则恢复原配对。
    """
    if len(p.pairs) < 2:
        return p, current_gain, False
    if move.pair_a == move.pair_b:
        raise DegenerateInputError("交换必须涉及两个不同的列对")

    evaluator = _PairEvaluator(m.entries)
    old_a, old_b = p.pairs[move.pair_a], p.pairs[move.pair_b]
    new_a, new_b = _exchange(old_a, old_b, move)
    candidate = (current_gain
                 - evaluator.gain(*old_a) - evaluator.gain(*old_b)
                 + evaluator.gain(*new_a) + evaluator.gain(*new_b))
    if candidate >= current_gain:
        return p.replaced(move.pair_a, new_a, move.pair_b, new_b), candidate, True
    return p, current_gain, False


def attempt_swap(m: DenseMatrix, p: Pairing, current_gain: int,
                 rng: np.random.Generator) -> Tuple[Pairing, int, bool]:
    """随机选两个不同列对，各取一列互换；少于两个列对时不做任何事"""
    if len(p.pairs) < 2:
        return p, current_gain, False
    return apply_swap(m, p, current_gain, _draw_move(rng, len(p.pairs)))


def eliminate_commons(m: DenseMatrix, commons: CseSet) -> DenseMatrix:
    """把 CSE 占用的单元格置零，返回更新后的矩阵"""
    if not commons.terms:
        return m
    commons.check_disjoint()

    entries = m.entries.copy()
    for term in commons:
        rows = np.asarray(term.occ_rows)
        if rows[-1] >= m.rows or rows[0] < 0:
            raise CorruptedSetError(f"CSE 行号超出范围: {term.occ_rows}")
        for col, weight in ((term.col_i, term.w_i), (term.col_j, term.w_j)):
            if not 0 <= col < m.cols:
                raise CorruptedSetError(f"CSE 列号超出范围: {col}")
            cells = entries[rows, col]
            if np.any(cells == 0):
                raise CorruptedSetError(f"CSE 引用了已为零的单元格: 列 {col}, 行 {term.occ_rows}")
            if np.any(cells != weight):
                raise CorruptedSetError(f"CSE 权重 {weight} 与列 {col} 的元素不符")
            entries[rows, col] = 0
    return DenseMatrix(entries)


def run_extraction(m: DenseMatrix, cfg: ExtractConfig,
                   on_attempt: Optional[AttemptCallback] = None) -> ExtractResult:
    """完整的 CSE 检测搜索，附带每轮迭代的统计信息。

    Args:
        m: 原始矩阵
        cfg: 搜索参数
        on_attempt: 每次交换尝试后的回调 (iteration, attempt, gain, accepted)

    Returns:
        ExtractResult：CSE 集合、余项矩阵与迭代历史
    """
    cfg.validate()
    if m.cols < 2 or m.nnz == 0:
        logger.debug(f"矩阵 {m.rows}×{m.cols} (E={m.nnz}) 不存在可提取的两项 CSE")
        return ExtractResult(CseSet(), m, ())

    rng = np.random.default_rng(cfg.seed)
    current = m
    collected: List[CseTerm] = []
    history: List[IterationStats] = []

    for iteration in range(cfg.iterations):
        evaluator = _PairEvaluator(current.entries)
        pairs = list(pair_columns_random(current.cols, rng).pairs)
        gains = [evaluator.gain(i, j) for i, j in pairs]
        gain = initial_gain = sum(gains)
        accepted = 0

        if len(pairs) >= 2:
            for attempt in range(cfg.attempts):
                move = _draw_move(rng, len(pairs))
                a, b = move.pair_a, move.pair_b
                new_a, new_b = _exchange(pairs[a], pairs[b], move)
                gain_a = evaluator.gain(*new_a)
                gain_b = evaluator.gain(*new_b)
                candidate = gain - gains[a] - gains[b] + gain_a + gain_b
                ok = candidate >= gain
                if ok:
                    pairs[a], pairs[b] = new_a, new_b
                    gains[a], gains[b] = gain_a, gain_b
                    gain = candidate
                    accepted += 1
                if on_attempt is not None:
                    on_attempt(iteration, attempt, gain, ok)

        terms = [term for (i, j), g in zip(pairs, gains) if g > 0
                 for term in evaluator.terms(i, j)]
        history.append(IterationStats(
            iteration=iteration,
            initial_gain=initial_gain,
            final_gain=gain,
            accepted=accepted,
            n_terms=len(terms),
        ))
        logger.debug(
            f"迭代 {iteration}: 初始收益 {initial_gain} → {gain}，"
            f"接受 {accepted} 次交换，新增 {len(terms)} 个 CSE"
        )

        if terms:
            current = eliminate_commons(current, CseSet(tuple(terms)))
            collected.extend(terms)
        elif cfg.early_stop:
            logger.debug(f"迭代 {iteration} 收益为零，提前停止")
            break

    result = ExtractResult(CseSet(tuple(collected)), current, tuple(history))
    logger.info(
        f"CSE 提取完成：{result.iterations_run} 轮迭代，收益 {result.total_gain}，"
        f"|CSE|={result.commons.n_cse}，E {m.nnz} → {current.nnz}"
    )
    return result


def extract(m: DenseMatrix, cfg: ExtractConfig,
            on_attempt: Optional[AttemptCallback] = None) -> Tuple[CseSet, DenseMatrix]:
    """CSE 检测算法：返回 (CSE 集合, 余项矩阵)"""
    result = run_extraction(m, cfg, on_attempt)
    return result.commons, result.remainder


def _pairings(columns: Sequence[int], allow_unpaired: bool) -> Iterator[List[Tuple[int, int]]]:
    if len(columns) < 2:
        if not columns or allow_unpaired:
            yield []
        return
    first, rest = columns[0], columns[1:]
    if allow_unpaired:
        yield from _pairings(rest, False)
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        for tail in _pairings(remaining, allow_unpaired):
            yield [(first, partner)] + tail


def exhaustive_pairing_gain(m: DenseMatrix) -> Tuple[int, Pairing]:
    """穷举所有配对，返回单轮迭代能达到的最大收益（仅适用于小矩阵）"""
    if m.cols < 2:
        raise DegenerateInputError(f"至少需要两列才能配对，当前为 {m.cols}")
    evaluator = _PairEvaluator(m.entries)
    table = {(i, j): evaluator.gain(i, j) for i, j in itertools.combinations(range(m.cols), 2)}

    best_gain = -1
    best_pairs: List[Tuple[int, int]] = []
    for pairs in _pairings(list(range(m.cols)), m.cols % 2 == 1):
        total = sum(table[pair] for pair in pairs)
        if total > best_gain:
            best_gain, best_pairs = total, pairs

    paired = {c for pair in best_pairs for c in pair}
    unpaired = tuple(c for c in range(m.cols) if c not in paired)
    return best_gain, Pairing(tuple(best_pairs), unpaired)
