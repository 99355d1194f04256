# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Longest-common-subsequence length over int-encoded token sequences.

Two-row dynamic program, O(len(a) * len(b)) time and O(len(b)) memory.
Token strings are interned to ints by the caller; the kernel only compares
integers, which keeps the inner loop free of Python object traffic.
"""

from libc.stdlib cimport free, malloc


def lcs_length_i32(const int[:] a, const int[:] b):
    cdef Py_ssize_t la = a.shape[0]
    cdef Py_ssize_t lb = b.shape[0]
    if la == 0 or lb == 0:
        return 0
    cdef int *prev = <int *> malloc((lb + 1) * sizeof(int))
    cdef int *curr = <int *> malloc((lb + 1) * sizeof(int))
    if prev == NULL or curr == NULL:
        free(prev)
        free(curr)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef int ai, up, left, best
    cdef int *tmp
    cdef int result
    with nogil:
        for j in range(lb + 1):
            prev[j] = 0
        curr[0] = 0
        for i in range(la):
            ai = a[i]
            for j in range(lb):
                if ai == b[j]:
                    curr[j + 1] = prev[j] + 1
                else:
                    up = prev[j + 1]
                    left = curr[j]
                    curr[j + 1] = up if up >= left else left
            tmp = prev
            prev = curr
            curr = tmp
        result = prev[lb]
    free(prev)
    free(curr)
    return result
