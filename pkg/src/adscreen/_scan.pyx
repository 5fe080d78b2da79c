# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled scan kernels. Must stay semantically identical to _scan_py."""

import numpy as np


def count_scan(const int[:, ::1] delta, const int[::1] out_offsets,
               const int[::1] out_patterns, const int[::1] pattern_lengths,
               const unsigned char[::1] word_mask,
               const unsigned char[::1] data, long long[::1] counts):
    cdef Py_ssize_t i, n = data.shape[0]
    cdef int s = 0
    cdef int j, end, pid
    cdef Py_ssize_t start
    for i in range(n):
        s = delta[s, data[i]]
        j = out_offsets[s]
        end = out_offsets[s + 1]
        while j < end:
            pid = out_patterns[j]
            start = i - pattern_lengths[pid] + 1
            if (start == 0 or word_mask[data[start - 1]] == 0) and \
               (i + 1 == n or word_mask[data[i + 1]] == 0):
                counts[pid] += 1
            j += 1


def find_scan(const int[:, ::1] delta, const int[::1] out_offsets,
              const int[::1] out_patterns, const int[::1] pattern_lengths,
              const unsigned char[::1] word_mask,
              const unsigned char[::1] data):
    cdef Py_ssize_t i, n = data.shape[0]
    cdef int s = 0
    cdef int j, end, pid
    cdef Py_ssize_t start, n_hits = 0, capacity = 64
    cdef object pid_arr = np.empty(capacity, dtype=np.int32)
    cdef object start_arr = np.empty(capacity, dtype=np.int64)
    cdef int[::1] pids = pid_arr
    cdef long long[::1] starts = start_arr
    for i in range(n):
        s = delta[s, data[i]]
        j = out_offsets[s]
        end = out_offsets[s + 1]
        while j < end:
            pid = out_patterns[j]
            start = i - pattern_lengths[pid] + 1
            if (start == 0 or word_mask[data[start - 1]] == 0) and \
               (i + 1 == n or word_mask[data[i + 1]] == 0):
                if n_hits == capacity:
                    capacity = capacity * 2
                    pid_arr = np.concatenate([pid_arr, np.empty(capacity - n_hits, dtype=np.int32)])
                    start_arr = np.concatenate([start_arr, np.empty(capacity - n_hits, dtype=np.int64)])
                    pids = pid_arr
                    starts = start_arr
                pids[n_hits] = pid
                starts[n_hits] = start
                n_hits += 1
            j += 1
    return pid_arr[:n_hits].copy(), start_arr[:n_hits].copy()
