package runes

func Classify(r rune) int {
	switch r {
	case '{':
		return 1
	case '}':
		return 2
	case '\\':
		return 3
	case '\x7b', '}', '\'':
		return 4
	case '`':
		return 5
	case '"':
		return 6
	}
	return 0
}

func Last() rune { return '}' }
