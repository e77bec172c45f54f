"""numpy fallback for the compiled CART kernels (same results, bit for bit)."""
import numpy as np


def best_split(X, y, idx, features, n_classes, min_leaf):
    n = len(idx)
    if n < 2 * min_leaf or n < 2:
        return -1, 0.0, 0.0
    ys = y[idx]
    total = np.bincount(ys, minlength=n_classes).astype(np.int64)
    parent_sq = int(total @ total)
    parent_score = parent_sq / n
    best_feature, best_thr, best_score = -1, 0.0, parent_score

    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    for f in features:
        values = X[idx, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        onehot[:] = 0
        onehot[np.arange(n), ys[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        right = total - left
        a_left = (left * left).sum(axis=1)
        a_right = (right * right).sum(axis=1)
        valid = size_ok & (v[:-1] < v[1:])
        if not valid.any():
            continue
        score = (a_left * nr + a_right * nl).astype(np.float64) / (nl * nr).astype(np.float64)
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score = float(score[i])
            best_feature = int(f)
            thr = (v[i] + v[i + 1]) / 2.0
            if thr >= v[i + 1]:
                thr = v[i]
            best_thr = float(thr)
    if best_feature < 0:
        return -1, 0.0, parent_score
    return best_feature, best_thr, best_score


def apply_tree(feature, threshold, left, right, X):
    node = np.zeros(X.shape[0], dtype=np.intp)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        cur = node[r]
        go_left = X[r, feature[cur]] <= threshold[cur]
        node[r] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return node
