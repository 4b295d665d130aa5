#include "minixml.h"

#include <stdlib.h>
#include <string.h>

/* Every allocation is registered on its document so mx_free_document can
 * release everything; attachment never transfers ownership. */

struct MxAttr {
    char* name;        /* full name ("x" or "p:x") */
    const char* local; /* points into name, after the prefix colon */
    char* uri;         /* NULL for plain attributes */
    int is_ns;
    MxDocument* owner;
    struct MxAttr* next_ns; /* intrusive list of attached ns attributes */
};

struct MxElement {
    char* tag;
    MxDocument* owner;
    MxAttr* plain;   /* single plain-attribute slot */
    MxAttr* ns_head; /* attached namespaced attributes */
};

struct MxDocument {
    void** allocs;
    size_t n_allocs;
    size_t cap_allocs;
};

static void* doc_alloc(MxDocument* doc, size_t size) {
    if (doc->n_allocs == doc->cap_allocs) {
        size_t cap = doc->cap_allocs ? doc->cap_allocs * 2 : 16;
        void** grown = (void**)realloc(doc->allocs, cap * sizeof(void*));
        if (!grown) return NULL;
        doc->allocs = grown;
        doc->cap_allocs = cap;
    }
    void* p = calloc(1, size);
    if (p) doc->allocs[doc->n_allocs++] = p;
    return p;
}

static char* doc_strdup(MxDocument* doc, const char* s) {
    size_t n = strlen(s) + 1;
    char* copy = (char*)doc_alloc(doc, n);
    if (copy) memcpy(copy, s, n);
    return copy;
}

MxDocument* mx_create_document(void) {
    return (MxDocument*)calloc(1, sizeof(MxDocument));
}

MxElement* mx_create_element(MxDocument* doc, const char* tag) {
    if (!doc || !tag) return NULL;
    MxElement* el = (MxElement*)doc_alloc(doc, sizeof(MxElement));
    if (!el) return NULL;
    el->tag = doc_strdup(doc, tag);
    el->owner = doc;
    return el;
}

MxAttr* mx_create_attr(MxDocument* doc, const char* name) {
    if (!doc || !name || name[0] == '\0') return NULL;
    MxAttr* attr = (MxAttr*)doc_alloc(doc, sizeof(MxAttr));
    if (!attr) return NULL;
    attr->name = doc_strdup(doc, name);
    attr->local = attr->name;
    attr->uri = NULL;
    attr->is_ns = 0;
    attr->owner = doc;
    return attr;
}

MxAttr* mx_create_attr_ns(MxDocument* doc, const char* uri,
                          const char* prefix, const char* local) {
    if (!doc || !uri || uri[0] == '\0' || !prefix) return NULL;
    if (!local || local[0] == '\0') return NULL;
    size_t prefix_len = strlen(prefix);
    MxAttr* attr = (MxAttr*)doc_alloc(doc, sizeof(MxAttr));
    if (!attr) return NULL;
    if (prefix_len == 0) {
        attr->name = doc_strdup(doc, local);
        attr->local = attr->name;
    } else {
        size_t n = prefix_len + 1 + strlen(local) + 1;
        char* qname = (char*)doc_alloc(doc, n);
        if (!qname) return NULL;
        memcpy(qname, prefix, prefix_len);
        qname[prefix_len] = ':';
        memcpy(qname + prefix_len + 1, local, strlen(local) + 1);
        attr->name = qname;
        attr->local = qname + prefix_len + 1;
    }
    attr->uri = doc_strdup(doc, uri);
    attr->is_ns = 1;
    attr->owner = doc;
    return attr;
}

int mx_set_attr_node(MxElement* el, MxAttr* attr, MxAttr** replaced) {
    if (!el || !attr) return MX_ERR;
#ifndef MINIXML_MISUSE_MODEL
    if (attr->is_ns) return MX_ERR; /* wrong constructor kind */
#endif
    if (attr->owner != el->owner) return MX_ERR; /* parent-document mismatch */
    if (replaced) *replaced = el->plain;
    el->plain = attr;
    return MX_OK;
}

int mx_set_attr_node_ns(MxElement* el, MxAttr* attr, MxAttr** replaced) {
    if (!el || !attr) return MX_ERR;
#ifndef MINIXML_MISUSE_MODEL
    if (!attr->is_ns) return MX_ERR; /* wrong constructor kind */
#endif
    if (attr->uri[0] == '\0') return MX_ERR; /* NULL deref on misuse builds */
    if (attr->owner != el->owner) return MX_ERR;
    if (replaced) *replaced = NULL;
    /* Namespaced attributes may shadow a plain attribute of the same local
     * name; in that case the plain one is displaced. The displacement path
     * assumes the match is namespaced and consults its uri -- for a plain
     * attribute uri is NULL. */
    if (el->plain && strcmp(el->plain->local, attr->local) == 0) {
        MxAttr* shadowed = el->plain;
        if (strcmp(shadowed->uri, attr->uri) != 0) { /* planted: NULL deref */
            el->plain = NULL;
        }
        if (replaced) *replaced = shadowed;
    }
    attr->next_ns = el->ns_head;
    el->ns_head = attr;
    return MX_OK;
}

const char* mx_attr_name(const MxAttr* attr) { return attr ? attr->name : NULL; }

int mx_attr_is_ns(const MxAttr* attr) { return attr ? attr->is_ns : 0; }

void mx_free_document(MxDocument* doc) {
    if (!doc) return;
    for (size_t i = 0; i < doc->n_allocs; i++) free(doc->allocs[i]);
    free(doc->allocs);
    free(doc);
}
