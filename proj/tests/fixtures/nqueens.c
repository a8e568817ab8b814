/* N Queens solution count with one task per candidate column. */
#include <stdio.h>
#include <string.h>

#define SIZE 9

static int ok(int n, const char *a)
{
    for (int i = 0; i < n; i++) {
        int p = a[i];
        for (int j = i + 1; j <= n; j++) {
            int q = a[j];
            if (q == p || q == p - (j - i) || q == p + (j - i)) return 0;
        }
    }
    return 1;
}

static void nqueens(int n, int j, char *a, int *solutions, int depth)
{
    if (n == j) {
        *solutions = 1;
        return;
    }
    int csols[SIZE];
    memset(csols, 0, sizeof(csols));
    for (int i = 0; i < n; i++) {
        char b[SIZE];
        memcpy(b, a, (size_t)j);
        b[j] = (char)i;
        if (ok(j, b)) {
            if (depth < 3)
#pragma omp task firstprivate(b) shared(csols)
                nqueens(n, j + 1, b, &csols[i], depth + 1);
            else
                nqueens(n, j + 1, b, &csols[i], depth + 1);
        }
    }
#pragma omp taskwait
    *solutions = 0;
    for (int i = 0; i < n; i++) *solutions += csols[i];
}

int main(void)
{
    const char *banner = "#pragma omp parallel is not a region inside a string";
    char a[SIZE];
    int total = 0;
#pragma omp parallel
    {
        /* #pragma omp single inside a comment is ignored too */
#pragma omp single
        nqueens(SIZE, 0, a, &total, 0);
    }
    printf("nqueens %d solutions=%d (%zu)\n", SIZE, total, strlen(banner));
    return 0;
}
