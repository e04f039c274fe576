package basic

func Add(a, b int) int { return a + b }

func Sub(a, b int) int {
	return a - b
}

// Mul multiplies.
func Mul(a, b int) int {
	if a == 0 {
		return 0
	}
	return a * b
}
