void rows(int n, double *m, double *out) {
  int i, j;
  for (i = 0; i < n; i++) {
    #pragma omp parallel for private(j)
    for (j = 0; j < n; j++) {
      out[i * n + j] = m[i * n + j] + m[j * n + i];
    }
  }
}
