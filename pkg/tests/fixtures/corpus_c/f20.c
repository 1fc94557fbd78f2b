void pipeline(int n, double *a, double *b, double *c) {
  int i;
  #pragma omp parallel for num_threads(8)
  for (i = 0; i < n; i++) {
    a[i] = b[i] * c[i];
  }
  #pragma omp parallel for schedule(dynamic)
  for (i = 0; i < n; i++) {
    c[i] = a[i] - b[i];
  }
  for (i = 2; i < n; i++) {
    b[i] = b[i - 2] * 0.5;
  }
}
