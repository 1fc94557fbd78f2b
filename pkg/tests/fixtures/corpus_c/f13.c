void clamp(int n, double *a, double lo, double hi) {
  int i;
  double v;
  #pragma omp parallel for private(v)
  for (i = 0; i < n; i++) {
    v = a[i];
    if (v < lo) {
      a[i] = lo;
    } else {
      if (v > hi) {
        a[i] = hi;
      }
    }
  }
  while (n > 0) {
    n--;
  }
  for (i = 0; i < 4; i++) {
    a[i] = 0.0;
  }
}
