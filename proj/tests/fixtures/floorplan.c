/* Branch-and-bound floorplan search for the minimum bounding area. */
#include <limits.h>
#include <stdio.h>

#define CELLS 6

static const int widths[CELLS] = {2, 3, 1, 4, 2, 3};
static const int heights[CELLS] = {3, 1, 2, 2, 4, 1};
static int best_area = INT_MAX;
static long visited = 0;

static void place(int k, int w, int h, int rotate_mask)
{
    int area = w * h;
    if (area >= best_area) return;
    if (k == CELLS) {
#pragma omp critical
        {
            if (area < best_area) best_area = area;
        }
        return;
    }
    for (int r = 0; r < 2; r++) {
        int cw = r ? heights[k] : widths[k];
        int ch = r ? widths[k] : heights[k];
        int nw, nh;
        switch (k % 2) {
        case 0:
            nw = w + cw;
            nh = h > ch ? h : ch;
            break;
        default:
            nw = w > cw ? w : cw;
            nh = h + ch;
            break;
        }
        if (k < 2)
#pragma omp task firstprivate(nw, nh)
            place(k + 1, nw, nh, rotate_mask | (r << k));
        else
            place(k + 1, nw, nh, rotate_mask | (r << k));
    }
#pragma omp atomic
    visited++;
#pragma omp taskwait
}

static int lower_bound(void)
{
    int cells = 0, i = 0;
    do {
        cells += widths[i] * heights[i];
    } while (++i < CELLS);
    return cells;
}

int main(void)
{
    int bound = 0, search = 0;
#pragma omp parallel sections
    {
#pragma omp section
        bound = lower_bound();
#pragma omp section
        search = 1;
    }
    if (!search)
        return 1;
    else
#pragma omp parallel
    {
#pragma omp single
        place(0, 0, 0, 0);
#pragma omp barrier
    }
    printf("floorplan best %d bound %d\n", best_area, bound);
    (void)visited;
    goto end;
end:
    return 0;
}
