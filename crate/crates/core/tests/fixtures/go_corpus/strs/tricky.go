package strs

const open = "{"
const close = "}"

var msg = "func fake() { not a func }"

func Braces() string {
	s := "}}}"
	t := "{\"quoted\" {"
	u := `raw } with "func" inside {`
	return s + t + u
}

func Escapes() string {
	return "back\\slash } \" {"
}

func Runes() []rune {
	return []rune{'{', '}', '\'', '"', '\\'}
}

func AfterAll() int { return len(open + close) }
