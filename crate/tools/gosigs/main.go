// Command gosigs writes the reference signature manifest for the Go fixture
// corpus using the standard library parser.
//
//	go run ./tools/gosigs crates/core/tests/fixtures/go_corpus > crates/core/tests/fixtures/go_manifest.json
package main

import (
	"encoding/json"
	"fmt"
	"go/ast"
	"go/parser"
	"go/token"
	"go/types"
	"io/fs"
	"os"
	"path/filepath"
	"sort"
	"strings"
)

type entry struct {
	File      string  `json:"file"`
	Name      string  `json:"name"`
	Receiver  *string `json:"receiver"`
	LineStart int     `json:"line_start"`
	LineEnd   int     `json:"line_end"`
}

func main() {
	if len(os.Args) != 2 {
		fmt.Fprintln(os.Stderr, "usage: gosigs <root>")
		os.Exit(2)
	}
	root := os.Args[1]
	var files []string
	err := filepath.WalkDir(root, func(path string, d fs.DirEntry, err error) error {
		if err != nil {
			return err
		}
		if d.Type().IsRegular() && strings.HasSuffix(path, ".go") {
			files = append(files, path)
		}
		return nil
	})
	if err != nil {
		fmt.Fprintln(os.Stderr, err)
		os.Exit(1)
	}
	sort.Strings(files)
	entries := []entry{}
	for _, path := range files {
		rel, _ := filepath.Rel(root, path)
		rel = filepath.ToSlash(rel)
		fset := token.NewFileSet()
		f, err := parser.ParseFile(fset, path, nil, parser.ParseComments|parser.SkipObjectResolution)
		if err != nil {
			fmt.Fprintln(os.Stderr, err)
			os.Exit(1)
		}
		for _, decl := range f.Decls {
			fd, ok := decl.(*ast.FuncDecl)
			if !ok || fd.Body == nil {
				continue
			}
			e := entry{
				File:      rel,
				Name:      fd.Name.Name,
				LineStart: fset.Position(fd.Pos()).Line,
				LineEnd:   fset.Position(fd.Body.Rbrace).Line,
			}
			if fd.Recv != nil && len(fd.Recv.List) == 1 {
				r := strings.Join(strings.Fields(types.ExprString(fd.Recv.List[0].Type)), "")
				e.Receiver = &r
			}
			entries = append(entries, e)
		}
	}
	out, _ := json.MarshalIndent(entries, "", "  ")
	fmt.Println(string(out))
}
