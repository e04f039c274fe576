package labels

func Loop(xs []int) int {
	total := 0
outer:
	for i := range xs {
		switch {
		case xs[i] < 0:
			continue outer
		case xs[i] == 0:
			break outer
		default:
			total += xs[i]
		}
	}
	return total
}

func Select(c chan int, d chan struct{}) int {
	select {
	case v := <-c:
		return v
	case <-d:
		return -1
	}
}

func Composite() map[string][]struct{ A, B int } {
	return map[string][]struct{ A, B int }{
		"x": {{1, 2}, {3, 4}},
	}
}
