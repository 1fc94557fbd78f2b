void warmup(int n, double *a) {
  int i;
  for (i = 0; i < n; i++);
  #pragma omp parallel for
  for (i = 0; i < n; i++) {
    a[i] = 1.5;
  }
}
