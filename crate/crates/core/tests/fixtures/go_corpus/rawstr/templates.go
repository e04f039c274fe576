package rawstr

const tmpl = `
{{ range .Items }}
  func {{ .Name }}() {
{{ end }}
`

func Render() string {
	return `}
}
}`
}

func Query() string {
	q := `SELECT "{" FROM t WHERE x = '}'`
	return q
}
