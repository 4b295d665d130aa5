#include "minijson.h"

#include <ctype.h>
#include <stdlib.h>
#include <string.h>

struct MjValue {
    int is_array;
    int size;
    int* items; /* exact-size heap block: OOB indices trip ASan */
    long scalar;
};

MjValue* mj_parse(const char* text) {
    if (!text || text[0] == '\0') return NULL;
    MjValue* v = (MjValue*)calloc(1, sizeof(MjValue));
    if (!v) return NULL;
    const char* p = text;
    while (isspace((unsigned char)*p)) p++;
    if (*p != '[') {
        v->scalar = strtol(p, NULL, 10);
        return v;
    }
    p++;
    int cap = 4;
    v->items = (int*)malloc(cap * sizeof(int));
    v->is_array = 1;
    while (*p && *p != ']') {
        while (isspace((unsigned char)*p) || *p == ',') p++;
        if (*p == ']' || *p == '\0') break;
        char* end = NULL;
        long n = strtol(p, &end, 10);
        if (end == p) break; /* junk: stop parsing, keep what we have */
        p = end;
        if (v->size == cap) {
            cap *= 2;
            v->items = (int*)realloc(v->items, cap * sizeof(int));
        }
        v->items[v->size++] = (int)n;
    }
    /* shrink to exact size so out-of-bounds access is observable */
    if (v->size > 0) {
        int* exact = (int*)malloc(v->size * sizeof(int));
        memcpy(exact, v->items, v->size * sizeof(int));
        free(v->items);
        v->items = exact;
    } else {
        free(v->items);
        v->items = NULL;
    }
    return v;
}

int mj_is_array(const MjValue* v) { return v ? v->is_array : 0; }

int mj_array_size(const MjValue* v) {
    return (v && v->is_array) ? v->size : 0;
}

int mj_array_get(const MjValue* v, int idx) { return v->items[idx]; }

int mj_delete_item(MjValue* v, int idx) {
    /* planted: no bounds check; idx >= size reads past the block */
    int removed = v->items[idx];
    for (int i = idx; i < v->size - 1; i++) v->items[i] = v->items[i + 1];
    v->size--;
    return removed;
}

void mj_free(MjValue* v) {
    if (!v) return;
    free(v->items);
    free(v);
}
